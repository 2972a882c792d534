"""Command line front end.

Subcommands: train, library, backtest, sweep, gradcheck, synth.  All
model-touching commands read one JSON config file (see the README for
the schema); a few common fields can be overridden by flags, and the
MUTUALAE_OUT_DIR environment variable overrides the output directory.

Exit codes: 0 on success, 1 for configuration or input validation
problems, 2 for runtime failures.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .autoencoder import AeConfig, ConvAutoencoder
from .checkpoint import load_checkpoint, save_checkpoint
from .dataio import SyntheticSpec, generate_synthetic, load_csv, make_windows, save_csv
from .dialogue import DialogueConfig, DialogueData, train_dialogue, train_separate
from .errors import (CheckpointError, ConfigError, DataError, MutualAeError,
                     ProtocolError, ShapeError, TrainingError)
from .gradcheck import run_layer_suite
from .pipeline import (RunSettings, build_autoencoders, heldout_segment,
                       library_from_windows)
from .regimes import PatternLibrary
from .rng import Rng
from .strategy import backtest, pair_sweep
from .svgplot import line_chart
from .translator import Translator

OUT_DIR_ENV = "MUTUALAE_OUT_DIR"

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_RUNTIME = 2


# ---------------------------------------------------------------- config

_MISSING = object()


def _pick(mapping: dict, key: str, path: str, kind, default=_MISSING):
    """Typed lookup with a field-path error message."""
    if not isinstance(mapping, dict):
        raise ConfigError(f"{path}: expected an object")
    if key not in mapping:
        if default is _MISSING:
            raise ConfigError(f"{path}.{key}: required field is missing")
        return default
    value = mapping[key]
    where = f"{path}.{key}"
    if kind is bool:
        if not isinstance(value, bool):
            raise ConfigError(f"{where}: expected true/false, got {value!r}")
        return value
    if kind is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{where}: expected an integer, got {value!r}")
        return value
    if kind is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{where}: expected a number, got {value!r}")
        return float(value)
    if kind is str:
        if not isinstance(value, str):
            raise ConfigError(f"{where}: expected a string, got {value!r}")
        return value
    if kind is list:
        if not isinstance(value, list):
            raise ConfigError(f"{where}: expected a list, got {value!r}")
        return value
    if kind is dict:
        if not isinstance(value, dict):
            raise ConfigError(f"{where}: expected an object, got {value!r}")
        return value
    raise TypeError(f"unsupported kind {kind!r}")


def _check_unknown(mapping: dict, path: str, allowed) -> None:
    extra = sorted(set(mapping) - set(allowed))
    if extra:
        raise ConfigError(f"{path}.{extra[0]}: unknown field")


def _parse_ae(mapping: dict, path: str, window: int, defaults: AeConfig) -> AeConfig:
    _check_unknown(mapping, path, {"code_dim", "conv_channels", "kernel",
                                   "code_sigma", "io_noise", "lr"})
    cfg = AeConfig(
        window=window,
        channels=2,
        conv_channels=_pick(mapping, "conv_channels", path, int, defaults.conv_channels),
        kernel=_pick(mapping, "kernel", path, int, defaults.kernel),
        code_dim=_pick(mapping, "code_dim", path, int, defaults.code_dim),
        code_sigma=_pick(mapping, "code_sigma", path, float, defaults.code_sigma),
        io_noise=_pick(mapping, "io_noise", path, float, defaults.io_noise),
        lr=_pick(mapping, "lr", path, float, defaults.lr),
    )
    cfg.validate(path)
    return cfg


def _parse_dialogue(mapping: dict, path: str) -> DialogueConfig:
    d = DialogueConfig()
    _check_unknown(mapping, path, {"epochs", "pretrain_epochs", "batches", "lam",
                                   "turn_length", "refresh_dicts", "align_on_mean",
                                   "agreement_threshold", "dict_epochs", "dict_lr",
                                   "checkpoint_every"})
    cfg = DialogueConfig(
        epochs=_pick(mapping, "epochs", path, int, d.epochs),
        pretrain_epochs=_pick(mapping, "pretrain_epochs", path, int, d.pretrain_epochs),
        batches=_pick(mapping, "batches", path, int, d.batches),
        lam=_pick(mapping, "lam", path, float, d.lam),
        turn_length=_pick(mapping, "turn_length", path, int, d.turn_length),
        refresh_dicts=_pick(mapping, "refresh_dicts", path, bool, d.refresh_dicts),
        align_on_mean=_pick(mapping, "align_on_mean", path, bool, d.align_on_mean),
        agreement_threshold=_pick(mapping, "agreement_threshold", path, float,
                                  d.agreement_threshold),
        dict_epochs=_pick(mapping, "dict_epochs", path, int, d.dict_epochs),
        dict_lr=_pick(mapping, "dict_lr", path, float, d.dict_lr),
        checkpoint_every=_pick(mapping, "checkpoint_every", path, int,
                               d.checkpoint_every),
    )
    cfg.validate(path)
    return cfg


def _parse_synthetic(mapping: dict, path: str):
    _check_unknown(mapping, path, {"length", "regimes", "template_len", "dwell_min",
                                   "dwell_max", "noise_rel", "rho", "horizon",
                                   "y_drift", "start_date", "seed", "views",
                                   "noise_contexts"})
    d = SyntheticSpec()
    spec = SyntheticSpec(
        length=_pick(mapping, "length", path, int, d.length),
        regimes=_pick(mapping, "regimes", path, int, d.regimes),
        template_len=_pick(mapping, "template_len", path, int, d.template_len),
        dwell_min=_pick(mapping, "dwell_min", path, int, d.dwell_min),
        dwell_max=_pick(mapping, "dwell_max", path, int, d.dwell_max),
        noise_rel=_pick(mapping, "noise_rel", path, float, d.noise_rel),
        rho=_pick(mapping, "rho", path, float, d.rho),
        horizon=_pick(mapping, "horizon", path, int, d.horizon),
        y_drift=_pick(mapping, "y_drift", path, float, d.y_drift),
        start_date=_pick(mapping, "start_date", path, str, d.start_date),
        seed=_pick(mapping, "seed", path, int, d.seed),
    )
    spec.validate(path)
    views = _pick(mapping, "views", path, int, 1)
    decoys = _pick(mapping, "noise_contexts", path, int, 0)
    if views < 1:
        raise ConfigError(f"{path}.views: must be >= 1, got {views}")
    if decoys < 0:
        raise ConfigError(f"{path}.noise_contexts: must be >= 0, got {decoys}")
    return spec, views, decoys


class RunConfig:
    """Parsed and validated top-level configuration."""

    def __init__(self, seed, out_dir, data_kind, synthetic, views, noise_contexts,
                 csv, settings):
        self.seed = seed
        self.out_dir = out_dir
        self.data_kind = data_kind
        self.synthetic = synthetic
        self.views = views
        self.noise_contexts = noise_contexts
        self.csv = csv
        self.settings = settings


def parse_config(payload: dict, path: str = "config") -> RunConfig:
    _check_unknown(payload, path, {"seed", "out_dir", "data", "window", "stride",
                                   "split", "ae1", "ae2", "dialogue", "regimes",
                                   "strategy"})
    seed = _pick(payload, "seed", path, int, 0)
    out_dir = _pick(payload, "out_dir", path, str, "runs/out")
    window = _pick(payload, "window", path, int, 32)
    stride = _pick(payload, "stride", path, int, 1)
    split = _pick(payload, "split", path, float, 0.8)

    data = _pick(payload, "data", path, dict)
    _check_unknown(data, f"{path}.data", {"kind", "synthetic", "csv"})
    kind = _pick(data, "kind", f"{path}.data", str)
    synthetic = views = decoys = csv = None
    if kind == "synthetic":
        synthetic, views, decoys = _parse_synthetic(
            _pick(data, "synthetic", f"{path}.data", dict, {}), f"{path}.data.synthetic")
    elif kind == "csv":
        c = _pick(data, "csv", f"{path}.data", dict)
        cpath = f"{path}.data.csv"
        _check_unknown(c, cpath, {"path", "target", "contexts", "target_kind", "horizon"})
        contexts = _pick(c, "contexts", cpath, list)
        if not contexts or not all(isinstance(s, str) for s in contexts):
            raise ConfigError(f"{cpath}.contexts: expected a non-empty list of column names")
        csv = {
            "path": _pick(c, "path", cpath, str),
            "target": _pick(c, "target", cpath, str),
            "contexts": contexts,
            "target_kind": _pick(c, "target_kind", cpath, str, "return"),
            "horizon": _pick(c, "horizon", cpath, int, 4),
        }
        if csv["target_kind"] not in ("price", "return"):
            raise ConfigError(
                f"{cpath}.target_kind: expected 'price' or 'return', got {csv['target_kind']!r}")
    else:
        raise ConfigError(f"{path}.data.kind: expected 'synthetic' or 'csv', got {kind!r}")

    base1 = AeConfig(window=window, code_dim=8, conv_channels=32)
    base2 = AeConfig(window=window, code_dim=6, conv_channels=16)
    ae1 = _parse_ae(_pick(payload, "ae1", path, dict, {}), f"{path}.ae1", window, base1)
    ae2 = _parse_ae(_pick(payload, "ae2", path, dict, {}), f"{path}.ae2", window, base2)
    dialogue = _parse_dialogue(_pick(payload, "dialogue", path, dict, {}), f"{path}.dialogue")

    reg = _pick(payload, "regimes", path, dict, {})
    _check_unknown(reg, f"{path}.regimes", {"clusters", "profile_len"})
    clusters = _pick(reg, "clusters", f"{path}.regimes", int, 4)
    profile_len = _pick(reg, "profile_len", f"{path}.regimes", int, 24)

    strat = _pick(payload, "strategy", path, dict, {})
    _check_unknown(strat, f"{path}.strategy", {"rebalance", "cost"})
    rebalance = strat.get("rebalance", None)
    if rebalance is not None:
        rebalance = _pick(strat, "rebalance", f"{path}.strategy", int)
    cost = _pick(strat, "cost", f"{path}.strategy", float, 0.0)

    settings = RunSettings(window=window, stride=stride, split=split, ae1=ae1,
                           ae2=ae2, dialogue=dialogue, clusters=clusters,
                           profile_len=profile_len, rebalance=rebalance, cost=cost)
    settings.validate()
    return RunConfig(seed=seed, out_dir=out_dir, data_kind=kind, synthetic=synthetic,
                     views=views, noise_contexts=decoys, csv=csv, settings=settings)


def read_config(path: str) -> RunConfig:
    try:
        with open(path) as fh:
            payload = json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    if not isinstance(payload, dict):
        raise ConfigError(f"{path}: top level must be a JSON object")
    return parse_config(payload)


# ----------------------------------------------------------------- data

def load_contexts(cfg: RunConfig) -> list:
    """All configured context series, sharing one target."""
    if cfg.data_kind == "synthetic":
        data = generate_synthetic(cfg.synthetic, n_views=cfg.views,
                                  noise_contexts=cfg.noise_contexts)
        return data.views + data.noise
    out = []
    c = cfg.csv
    for name in c["contexts"]:
        out.append(load_csv(c["path"], c["target"], name, c["horizon"],
                            target_kind=c["target_kind"],
                            min_rows=cfg.settings.window + c["horizon"]))
    return out


def primary_pair(cfg: RunConfig):
    """The two context series used by the train/library/backtest commands."""
    contexts = load_contexts(cfg)
    pair_a = contexts[0]
    pair_b = contexts[1] if len(contexts) > 1 else contexts[0]
    return pair_a, pair_b


# ------------------------------------------------------------ artifacts

def _out_dir(cfg: RunConfig, override: str | None) -> Path:
    out = os.environ.get(OUT_DIR_ENV) or override or cfg.out_dir
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _history_csv(path, records, agreement_by_epoch) -> None:
    with open(path, "w") as fh:
        fh.write("phase,epoch,batch,speaker,listener,recon,align,total,agreement\n")
        for r in records:
            al = agreement_by_epoch.get((r.phase, r.epoch), "")
            al_txt = repr(float(al)) if al != "" else ""
            fh.write(f"{r.phase},{r.epoch},{r.batch},{r.speaker},{r.listener},"
                     f"{repr(float(r.recon_loss))},{repr(float(r.align_loss))},"
                     f"{repr(float(r.total_loss))},{al_txt}\n")


def _epoch_means(records, phase: str, listener: int):
    by_epoch: dict = {}
    for r in records:
        if r.phase == phase and r.listener == listener:
            by_epoch.setdefault(r.epoch, []).append(r.recon_loss)
    epochs = sorted(by_epoch)
    return np.asarray(epochs, dtype=float), np.asarray(
        [float(np.mean(by_epoch[e])) for e in epochs])


def _save_models(path, ae1, ae2, d12, d21, extra) -> None:
    blocks = {"ae1_encoder": ae1.encoder, "ae1_decoder": ae1.decoder,
              "ae2_encoder": ae2.encoder, "ae2_decoder": ae2.decoder,
              "dict_1to2": d12.net, "dict_2to1": d21.net}
    save_checkpoint(path, blocks, extra=extra)


def _load_models(path):
    blocks, extra = load_checkpoint(path)
    needed = ["ae1_encoder", "ae1_decoder", "ae2_encoder", "ae2_decoder",
              "dict_1to2", "dict_2to1"]
    for name in needed:
        if name not in blocks:
            raise CheckpointError(f"checkpoint is missing block {name!r}")
    ae1 = ConvAutoencoder(AeConfig.from_dict(extra["ae1"]), Rng(0))
    ae2 = ConvAutoencoder(AeConfig.from_dict(extra["ae2"]), Rng(0))
    ae1.encoder, ae1.decoder = blocks["ae1_encoder"], blocks["ae1_decoder"]
    ae2.encoder, ae2.decoder = blocks["ae2_encoder"], blocks["ae2_decoder"]
    d12 = Translator(direction="1to2", net=blocks["dict_1to2"],
                     stamp=int(extra.get("dict_stamp", -1)))
    d21 = Translator(direction="2to1", net=blocks["dict_2to1"],
                     stamp=int(extra.get("dict_stamp", -1)))
    return ae1, ae2, d12, d21, extra


# ----------------------------------------------------------- subcommands

def cmd_train(args) -> int:
    cfg = read_config(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    if args.epochs is not None or args.lam is not None:
        d = cfg.settings.dialogue
        d = replace(d, epochs=args.epochs if args.epochs is not None else d.epochs,
                    lam=args.lam if args.lam is not None else d.lam)
        cfg.settings = replace(cfg.settings, dialogue=d)
        cfg.settings.validate()
    out = _out_dir(cfg, args.out)

    pair_a, pair_b = primary_pair(cfg)
    s = cfg.settings
    ws_a = make_windows(pair_a, s.window, s.stride, s.split)
    ws_b = make_windows(pair_b, s.window, s.stride, s.split)
    ae1, ae2 = build_autoencoders(s, cfg.seed)
    dcfg = replace(s.dialogue, seed=cfg.seed)

    on_epoch = None
    if dcfg.checkpoint_every > 0:
        def on_epoch(epoch, snapshot):
            if (epoch + 1) % dcfg.checkpoint_every == 0:
                meta = {"ae1": snapshot.ae1.config.to_dict(),
                        "ae2": snapshot.ae2.config.to_dict(),
                        "epoch": epoch, "dict_stamp": snapshot.dict_1to2.stamp}
                _save_models(out / f"model_epoch{epoch:04d}.ckpt",
                             snapshot.ae1, snapshot.ae2, snapshot.dict_1to2,
                             snapshot.dict_2to1, meta)

    result = train_dialogue(ae1, ae2, DialogueData(ws_a.train, ws_b.train), dcfg,
                            on_epoch=on_epoch)

    records = list(result.records)
    agreement_by_epoch: dict = {}
    first_epoch = dcfg.pretrain_epochs - 1
    for i, rep in enumerate(result.agreement):
        epoch = first_epoch + i
        agreement_by_epoch[("pretrain", epoch)] = rep.level
        agreement_by_epoch[("dialogue", epoch)] = rep.level

    if args.baseline:
        base1, base2 = build_autoencoders(s, cfg.seed)
        listens1 = dcfg.pretrain_epochs + sum(
            1 for k in range(dcfg.dialogue_epochs) if (k // dcfg.turn_length) % 2 == 1)
        listens2 = dcfg.pretrain_epochs + sum(
            1 for k in range(dcfg.dialogue_epochs) if (k // dcfg.turn_length) % 2 == 0)
        records += train_separate(base1, 1, ws_a.train, listens1, dcfg.batches,
                                  Rng(dcfg.seed))
        records += train_separate(base2, 2, ws_b.train, listens2, dcfg.batches,
                                  Rng(dcfg.seed))

    extra = {"ae1": ae1.config.to_dict(), "ae2": ae2.config.to_dict(),
             "seed": cfg.seed, "dict_stamp": result.dict_1to2.stamp,
             "context_a": pair_a.context_name, "context_b": pair_b.context_name,
             "stats_a": ws_a.stats(), "stats_b": ws_b.stats(),
             "window": s.window, "split": s.split, "horizon": pair_a.horizon}
    _save_models(out / "model.ckpt", ae1, ae2, result.dict_1to2,
                 result.dict_2to1, extra)
    _history_csv(out / "history.csv", records, agreement_by_epoch)

    series = {}
    for label, listener, phase in (("net1 dialogue", 1, "dialogue"),
                                   ("net2 dialogue", 2, "dialogue")):
        xs, ys = _epoch_means(records, phase, listener)
        if len(xs):
            series[label] = (xs, ys)
    for label, listener in (("net1 pretrain", 1), ("net2 pretrain", 2)):
        xs, ys = _epoch_means(records, "pretrain", listener)
        if len(xs):
            series[label] = (xs, ys)
    if args.baseline:
        for label, listener in (("net1 separate", 1), ("net2 separate", 2)):
            xs, ys = _epoch_means(records, "separate", listener)
            if len(xs):
                series[label] = (xs, ys)
    line_chart(out / "curves.svg", series, title="Reconstruction loss by epoch",
               x_label="epoch", y_label="mean loss")
    al_x = np.arange(len(result.agreement), dtype=float) + first_epoch
    al_y = np.asarray([rep.level for rep in result.agreement])
    line_chart(out / "agreement.svg", {"agreement level": (al_x, al_y)},
               title="Code agreement by epoch", x_label="epoch", y_label="level")

    final1 = [r.recon_loss for r in result.turns if r.listener == 1][-1:] or [float("nan")]
    final2 = [r.recon_loss for r in result.turns if r.listener == 2][-1:] or [float("nan")]
    print(f"trained {dcfg.epochs} epochs ({dcfg.pretrain_epochs} pretraining, "
          f"{dcfg.dialogue_epochs} dialogue) on "
          f"{pair_a.context_name}/{pair_b.context_name}")
    print(f"final recon: net1 {final1[0]:.6f}  net2 {final2[0]:.6f}  "
          f"agreement {result.agreement[-1].level:.3f}")
    print(f"wrote {out / 'model.ckpt'}, history.csv, curves.svg, agreement.svg")
    return EXIT_OK


def cmd_library(args) -> int:
    cfg = read_config(args.config)
    out = _out_dir(cfg, args.out)
    ckpt = Path(args.checkpoint) if args.checkpoint else out / "model.ckpt"
    ae1, ae2, _, _, extra = _load_models(ckpt)
    s = cfg.settings
    if args.clusters is not None:
        s = replace(s, clusters=args.clusters)
    if args.profile_len is not None:
        s = replace(s, profile_len=args.profile_len)
    s.validate()

    pair_a, pair_b = primary_pair(cfg)
    side = args.side
    pair = pair_a if side == "a" else pair_b
    ae = ae1 if side == "a" else ae2
    ws = make_windows(pair, s.window, s.stride, s.split)
    library = library_from_windows(ae, ws, s.clusters, s.profile_len,
                                   cfg.seed, pair.context_name)
    lib_path = out / f"library_{side}.json"
    library.save(lib_path)

    xs = np.arange(s.profile_len, dtype=float)
    for label, profiles in (("up", library.up), ("down", library.down)):
        series = {f"{label} {p.cluster_id} (n={p.members})": (xs, p.values)
                  for p in profiles}
        line_chart(out / f"profiles_{side}_{label}.svg", series,
                   title=f"{pair.context_name}: {label} profiles",
                   x_label="window step", y_label="normalized context")
    print(f"library for context {pair.context_name!r}: "
          f"{len(library.up)} up / {len(library.down)} down profiles "
          f"({library.n_up} vs {library.n_down} windows)")
    print(f"wrote {lib_path}, profiles_{side}_up.svg, profiles_{side}_down.svg")
    return EXIT_OK


def cmd_backtest(args) -> int:
    cfg = read_config(args.config)
    out = _out_dir(cfg, args.out)
    side = args.side
    lib_path = Path(args.library) if args.library else out / f"library_{side}.json"
    library = PatternLibrary.load(lib_path)

    pair_a, pair_b = primary_pair(cfg)
    pair = pair_a if side == "a" else pair_b
    if library.context_name != pair.context_name:
        raise ConfigError(
            f"library was built for context {library.context_name!r} but the "
            f"configured side {side!r} is {pair.context_name!r}")
    s = cfg.settings
    ws = make_windows(pair, s.window, s.stride, s.split)
    segment = heldout_segment(pair, ws)
    result = backtest(segment, library, step=args.step or s.rebalance,
                      cost=args.cost if args.cost is not None else s.cost)

    with open(out / f"positions_{side}.csv", "w") as fh:
        fh.write("index,date,theta,exposure,payoff,cumulative\n")
        for i in range(len(result.times)):
            fh.write(f"{result.times[i]},{result.dates[i]},"
                     f"{repr(float(result.theta[i]))},"
                     f"{repr(float(result.exposure[i]))},"
                     f"{repr(float(result.payoff[i]))},"
                     f"{repr(float(result.cumulative[i]))}\n")
    with open(out / f"summary_{side}.json", "w") as fh:
        fh.write(json.dumps(result.summary(), sort_keys=True, separators=(",", ":")))
        fh.write("\n")
    line_chart(out / f"equity_{side}.svg",
               {"cumulative": (result.times.astype(float), result.cumulative)},
               title=f"{pair.context_name}: cumulative payoff",
               x_label="held-out index", y_label="cumulative return")

    print(f"backtest {pair.context_name!r}: total {result.total_return:+.4f}, "
          f"max drawdown {result.max_drawdown:.4f}, hit rate {result.hit_rate:.3f} "
          f"over {result.n_trades} trades")
    print(f"wrote positions_{side}.csv, summary_{side}.json, equity_{side}.svg")
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg = read_config(args.config)
    out = _out_dir(cfg, args.out)
    contexts = load_contexts(cfg)
    results = pair_sweep(contexts, cfg.settings, seed=cfg.seed,
                         workers=args.workers)
    ranked = sorted(results, key=lambda r: -r.combined_return)

    with open(out / "sweep.csv", "w") as fh:
        fh.write("context_a,context_b,duplicate,return_a,return_b,combined,"
                 "hit_a,hit_b,agreement\n")
        for r in ranked:
            fh.write(f"{r.context_a},{r.context_b},{int(r.duplicate)},"
                     f"{repr(float(r.backtest_a.total_return))},"
                     f"{repr(float(r.backtest_b.total_return))},"
                     f"{repr(float(r.combined_return))},"
                     f"{repr(float(r.backtest_a.hit_rate))},"
                     f"{repr(float(r.backtest_b.hit_rate))},"
                     f"{repr(float(r.agreement_final))}\n")
    payload = [{"context_a": r.context_a, "context_b": r.context_b,
                "duplicate": r.duplicate, "return_a": r.backtest_a.total_return,
                "return_b": r.backtest_b.total_return,
                "combined": r.combined_return, "agreement": r.agreement_final}
               for r in ranked]
    with open(out / "sweep.json", "w") as fh:
        fh.write(json.dumps(payload, sort_keys=True, separators=(",", ":")))
        fh.write("\n")

    print(f"swept {len(results)} context pairs "
          f"({len(contexts)} contexts)")
    for r in ranked:
        dup = " [duplicate]" if r.duplicate else ""
        print(f"  {r.context_a} + {r.context_b}: combined {r.combined_return:+.4f}"
              f" (agreement {r.agreement_final:.3f}){dup}")
    print(f"wrote {out / 'sweep.csv'}, sweep.json")
    return EXIT_OK


def cmd_gradcheck(args) -> int:
    master = 2024 if args.seed is None else args.seed
    results = run_layer_suite(seeds=args.seeds, master_seed=master)
    worst = 0.0
    failures = 0
    for r in results:
        status = "ok  " if r.passed else "FAIL"
        print(f"{status} {r.name}: max relative error {r.max_rel_error:.3g} "
              f"over {r.n_components} components")
        worst = max(worst, r.max_rel_error)
        failures += 0 if r.passed else 1
    print(f"{len(results)} checks, worst relative error {worst:.3g}")
    if failures:
        print(f"{failures} gradient checks failed", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


def cmd_synth(args) -> int:
    cfg = read_config(args.config)
    out = _out_dir(cfg, args.out)
    if cfg.data_kind != "synthetic":
        raise ConfigError("config.data.kind: synth needs 'synthetic'")
    data = generate_synthetic(cfg.synthetic, n_views=cfg.views,
                              noise_contexts=cfg.noise_contexts)
    columns = {"r": data.returns_full}
    columns.update(data.x_full)
    save_csv(out / "synthetic.csv", data.dates_full, columns)
    n = len(data.pair)
    save_csv(out / "synthetic_truth.csv", data.dates_full[:n],
             {"regime": data.regime.astype(float), "drift": data.drift,
              "clean_x": data.clean_x})
    print(f"wrote {out / 'synthetic.csv'} ({len(data.dates_full)} rows, "
          f"{len(columns)} value columns) and synthetic_truth.csv")
    print("reload with: data.kind=csv, target='r', target_kind='return', "
          f"horizon={cfg.synthetic.horizon}")
    return EXIT_OK


# ----------------------------------------------------------------- main

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_CONFIG)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="mutualae",
                     description="Mutually regularized autoencoder pairs: "
                                 "training, pattern libraries and backtests.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, needs_config=True):
        if needs_config:
            p.add_argument("--config", required=True, help="JSON config file")
        p.add_argument("--out", default=None,
                       help=f"output directory (overridden by ${OUT_DIR_ENV})")

    p = sub.add_parser("train", help="run the speak/listen protocol")
    common(p)
    p.add_argument("--seed", type=int, default=None, help="override config.seed")
    p.add_argument("--epochs", type=int, default=None, help="override dialogue epochs")
    p.add_argument("--lam", type=float, default=None, help="override coupling weight")
    p.add_argument("--baseline", action="store_true",
                   help="also train both networks separately for comparison")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("library", help="extract a sign-conditioned pattern library")
    common(p)
    p.add_argument("--checkpoint", default=None, help="model checkpoint (default: OUT/model.ckpt)")
    p.add_argument("--side", choices=("a", "b"), default="a",
                   help="which context/network to use")
    p.add_argument("--clusters", type=int, default=None)
    p.add_argument("--profile-len", type=int, default=None, dest="profile_len")
    p.set_defaults(func=cmd_library)

    p = sub.add_parser("backtest", help="trade the held-out segment")
    common(p)
    p.add_argument("--library", default=None, help="library JSON (default: OUT/library_SIDE.json)")
    p.add_argument("--side", choices=("a", "b"), default="a")
    p.add_argument("--step", type=int, default=None, help="rebalance interval")
    p.add_argument("--cost", type=float, default=None, help="per-unit turnover cost")
    p.set_defaults(func=cmd_backtest)

    p = sub.add_parser("sweep", help="train and evaluate every context pair")
    common(p)
    p.add_argument("--workers", type=int, default=1,
                   help="parallel pair evaluations (results stay ordered)")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("gradcheck", help="verify analytic gradients numerically")
    common(p, needs_config=False)
    p.add_argument("--seeds", type=int, default=20, help="random architectures per layer kind")
    p.add_argument("--seed", type=int, default=None, help="master seed")
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("synth", help="write a synthetic planted-regime CSV")
    common(p)
    p.set_defaults(func=cmd_synth)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (ConfigError, DataError, CheckpointError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (TrainingError, ProtocolError, ShapeError, MutualAeError) as exc:
        print(f"runtime failure: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
