"""Command-line entry point exposing every pipeline stage.

Subcommands: synth, featurize, train, evaluate, classify, spectrogram,
serve. Settings come from built-in defaults, overridden by an optional
JSON config file, overridden in turn by explicit flags.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

import birdsong
from birdsong import audio_io, dsp, mfcc, nn, pipeline, train_eval
from birdsong.mfcc import FeatureConfig
from birdsong.pipeline import PipelineConfig
from birdsong.train_eval import TrainingConfig


class ConfigError(ValueError):
    """App config file is malformed or out of range."""


@dataclass(frozen=True)
class NetworkShape:
    hidden_sizes: tuple[int, ...] = (256, 256, 256)
    dropout_rate: float = 0.5


@dataclass(frozen=True)
class AppConfig:
    feature: FeatureConfig = field(default_factory=FeatureConfig)
    model: NetworkShape = field(default_factory=NetworkShape)
    training: TrainingConfig = field(default_factory=TrainingConfig)
    window_seconds: float = 15.0
    min_tail_seconds: float = 3.0
    confidence_threshold: float = 0.5
    sample_rate_hz: int = 44100

    def pipeline_config(self, model_path: str | None = None) -> PipelineConfig:
        return PipelineConfig(
            window_seconds=self.window_seconds,
            min_tail_seconds=self.min_tail_seconds,
            confidence_threshold=self.confidence_threshold,
            sample_rate_hz=self.sample_rate_hz,
            feature=self.feature,
            model_path=model_path,
        )


def _build_section(cls, overrides: dict, section: str):
    known = {f.name for f in fields(cls)}
    unknown = set(overrides) - known
    if unknown:
        raise ConfigError(f"unknown keys in config section {section!r}: {sorted(unknown)}")
    try:
        return cls(**overrides)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid config section {section!r}: {exc}") from exc


def load_app_config(path: str | None) -> AppConfig:
    """Defaults, overlaid with the JSON config file when one is given."""
    if path is None:
        return AppConfig()
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError("config file must hold a JSON object")
    known_sections = {"feature", "model", "training", "pipeline"}
    unknown = set(doc) - known_sections
    if unknown:
        raise ConfigError(f"unknown config sections: {sorted(unknown)}")

    feature = _build_section(FeatureConfig, dict(doc.get("feature", {})), "feature")
    model_section = dict(doc.get("model", {}))
    if "hidden_sizes" in model_section:
        model_section["hidden_sizes"] = tuple(model_section["hidden_sizes"])
    model = _build_section(NetworkShape, model_section, "model")
    training = _build_section(TrainingConfig, dict(doc.get("training", {})), "training")

    pipe = dict(doc.get("pipeline", {}))
    pipe_known = {"window_seconds", "min_tail_seconds", "confidence_threshold", "sample_rate_hz"}
    unknown = set(pipe) - pipe_known
    if unknown:
        raise ConfigError(f"unknown keys in config section 'pipeline': {sorted(unknown)}")
    try:
        return AppConfig(feature=feature, model=model, training=training, **pipe)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid config section 'pipeline': {exc}") from exc


def write_features_csv(path, clip_ids, labels, features: np.ndarray) -> None:
    n_coeffs = features.shape[1]
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["clip_id", "label"] + [f"c{i}" for i in range(n_coeffs)])
        for cid, label, row in zip(clip_ids, labels, features):
            writer.writerow([cid, label] + [repr(float(v)) for v in row])


def read_features_csv(path) -> tuple[list[str], list[str], np.ndarray]:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"features file not found: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header or header[:2] != ["clip_id", "label"]:
            raise ValueError("features CSV must start with clip_id,label columns")
        ids: list[str] = []
        labels: list[str] = []
        rows: list[list[float]] = []
        for row in reader:
            if not row:
                continue
            ids.append(row[0])
            labels.append(row[1])
            rows.append([float(v) for v in row[2:]])
    if not rows:
        raise ValueError("features CSV holds no data rows")
    return ids, labels, np.asarray(rows, dtype=np.float64)


def _cmd_synth(args) -> int:
    manifest = pipeline.generate_fixtures(
        n_per_class=args.per_class, seed=args.seed, out_dir=args.out
    )
    print(f"wrote {len(manifest)} clips and manifest.csv to {args.out}")
    return 0


def _cmd_featurize(args) -> int:
    app = load_app_config(args.config)
    manifest = train_eval.load_manifest(args.manifest)
    base = Path(args.manifest).parent
    ids: list[str] = []
    labels: list[str] = []
    vectors: list[np.ndarray] = []
    for rel_path, label in manifest.entries:
        clip_path = Path(rel_path)
        if not clip_path.is_absolute():
            clip_path = base / clip_path
        clip = audio_io.load_clip(clip_path.read_bytes(), target_rate_hz=app.sample_rate_hz)
        clip = audio_io.trim(clip, app.window_seconds)
        vectors.append(mfcc.clip_features(clip, app.feature))
        ids.append(rel_path)
        labels.append(label)
    write_features_csv(args.out, ids, labels, np.stack(vectors))
    print(f"featurized {len(ids)} clips -> {args.out}")
    return 0


def _apply_training_flags(config: TrainingConfig, args) -> TrainingConfig:
    updates = {}
    if args.epochs is not None:
        updates["epochs"] = args.epochs
    if args.batch_size is not None:
        updates["batch_size"] = args.batch_size
    if args.seed is not None:
        updates["seed"] = args.seed
    if args.test_fraction is not None:
        updates["test_fraction"] = args.test_fraction
    if not updates:
        return config
    merged = {f.name: getattr(config, f.name) for f in fields(TrainingConfig)}
    merged.update(updates)
    try:
        return TrainingConfig(**merged)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _cmd_train(args) -> int:
    app = load_app_config(args.config)
    t_config = _apply_training_flags(app.training, args)
    ids, label_strs, features = read_features_csv(args.features)

    label_set: list[str] = []
    for label in label_strs:
        if label not in label_set:
            label_set.append(label)
    y = np.array([label_set.index(l) for l in label_strs], dtype=np.int64)

    train_idx, test_idx = train_eval.stratified_split_indices(
        y, len(label_set), t_config.test_fraction, t_config.seed
    )
    model_config = nn.ModelConfig(
        layer_sizes=(features.shape[1], *app.model.hidden_sizes, len(label_set)),
        dropout_rate=app.model.dropout_rate,
    )
    net = nn.build_network(model_config, seed=t_config.seed, labels=tuple(label_set))
    net, history = train_eval.train(
        net, features[train_idx], y[train_idx], features[test_idx], y[test_idx], t_config
    )
    out_path = Path(args.out)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    nn.save_model(net, out_path)

    history_dir = Path(args.history_dir) if args.history_dir else out_path.parent
    csv_path, png_path = train_eval.export_history(history, history_dir)
    if args.test_out:
        write_features_csv(
            args.test_out,
            [ids[i] for i in test_idx],
            [label_strs[i] for i in test_idx],
            features[test_idx],
        )
    print(
        f"trained {nn.parameter_count(net)} parameters over {t_config.epochs} epochs; "
        f"final val accuracy {history.val_accuracy[-1]:.4f}"
    )
    print(f"model -> {out_path}; history -> {csv_path}, {png_path}")
    return 0


def _cmd_evaluate(args) -> int:
    net = nn.load_model(args.model)
    _, label_strs, features = read_features_csv(args.features)
    names = pipeline.class_names(net)
    try:
        y_true = np.array([names.index(l) for l in label_strs], dtype=np.int64)
    except ValueError:
        unknown = sorted({l for l in label_strs if l not in names})
        raise ValueError(f"labels not known to the model: {unknown}")
    probs = nn.forward(net, features, mode="infer")
    cm = train_eval.confusion_matrix(probs.argmax(axis=1), y_true, len(names))
    report = train_eval.compute_metrics(cm, labels=names)
    print(train_eval.render_metrics_table(report))
    if args.out:
        Path(args.out).write_text(train_eval.metrics_to_json(report), encoding="utf-8")
        print(f"metrics -> {args.out}")
    return 0


def _cmd_classify(args) -> int:
    app = load_app_config(args.config)
    if args.threshold is not None:
        app = AppConfig(
            feature=app.feature,
            model=app.model,
            training=app.training,
            window_seconds=app.window_seconds,
            min_tail_seconds=app.min_tail_seconds,
            confidence_threshold=args.threshold,
            sample_rate_hz=app.sample_rate_hz,
        )
    net = nn.load_model(args.model)
    p_config = app.pipeline_config(model_path=str(args.model))
    data = Path(args.audio).read_bytes()
    detections = pipeline.classify_recording(data, net, p_config)
    report = pipeline.summarize(
        detections,
        p_config,
        model_id=nn.model_fingerprint(net),
        source=pipeline.source_id(data),
    )
    body = pipeline.render_report_json(report)
    if args.out:
        out_path = Path(args.out)
        out_path.write_text(body, encoding="utf-8")
        csv_path = out_path.with_suffix(".csv")
        with csv_path.open("w", newline="", encoding="utf-8") as fh:
            csv.writer(fh).writerows(pipeline.report_to_csv_rows(report))
        print(f"{len(report.detections)} detections -> {out_path}, {csv_path}")
    else:
        print(body)
    return 0


def _cmd_spectrogram(args) -> int:
    app = load_app_config(args.config)
    frame_ms = args.frame_ms if args.frame_ms is not None else app.feature.frame_ms
    hop_ms = args.hop_ms if args.hop_ms is not None else app.feature.hop_ms
    clip = audio_io.load_clip(Path(args.audio).read_bytes())
    spec = dsp.power_spectrogram(clip, frame_ms, hop_ms)
    dsp.render_spectrogram(spec, args.out)
    print(f"spectrogram {spec.frames.shape[0]}x{spec.n_bins} -> {args.out}")
    return 0


def _cmd_serve(args) -> int:
    from birdsong import service

    app = load_app_config(args.config)
    service.serve(args.model, app.pipeline_config(model_path=str(args.model)), args.host, args.port)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="birdsong",
        description="Bird species classification from field audio recordings.",
    )
    parser.add_argument("--version", action="version", version=f"birdsong {birdsong.__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file; flags override its values")

    p = sub.add_parser("synth", parents=[common], help="generate the synthetic fixture corpus")
    p.add_argument("--per-class", type=int, default=10, help="clips per class (default 10)")
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("featurize", parents=[common], help="manifest of WAVs -> feature CSV")
    p.add_argument("--manifest", required=True, help="CSV with path,label columns")
    p.add_argument("--out", required=True, help="feature CSV to write")
    p.set_defaults(func=_cmd_featurize)

    p = sub.add_parser("train", parents=[common], help="feature CSV -> model file + history")
    p.add_argument("--features", required=True)
    p.add_argument("--out", required=True, help="model JSON path")
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch-size", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--test-fraction", type=float)
    p.add_argument("--test-out", help="write the held-out split as a feature CSV")
    p.add_argument("--history-dir", help="directory for history CSV/plot (default: model dir)")
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("evaluate", parents=[common], help="model + feature CSV -> metrics")
    p.add_argument("--model", required=True)
    p.add_argument("--features", required=True)
    p.add_argument("--out", help="metrics JSON path")
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("classify", parents=[common], help="model + recording -> detection report")
    p.add_argument("--model", required=True)
    p.add_argument("--audio", required=True)
    p.add_argument("--out", help="report JSON path (prints to stdout when omitted)")
    p.add_argument("--threshold", type=float, help="confidence threshold override")
    p.set_defaults(func=_cmd_classify)

    p = sub.add_parser("spectrogram", parents=[common], help="recording -> PNG spectrogram")
    p.add_argument("--audio", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--frame-ms", type=float)
    p.add_argument("--hop-ms", type=float)
    p.set_defaults(func=_cmd_spectrogram)

    p = sub.add_parser("serve", parents=[common], help="HTTP classification endpoint")
    p.add_argument("--model", required=True)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.set_defaults(func=_cmd_serve)
    return parser


def cli_main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (
        audio_io.WavError,
        nn.ModelFileError,
        train_eval.ManifestError,
        train_eval.TrainingDivergedError,
        FileNotFoundError,
        ValueError,
        OSError,
    ) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(cli_main(sys.argv[1:]))


if __name__ == "__main__":
    main()
