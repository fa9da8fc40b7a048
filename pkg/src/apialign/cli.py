"""Command line driver: ``synth``, ``train``, ``align``, ``mine``, ``eval``
and the end-to-end ``pipeline``.

Configuration is an INI file; every key is optional::

    [synth]
    specs = demo              # "demo" or a JSON concept spec file
    seed = 7
    n_per_concept = 50
    noise = 0.05              # total per-token corruption rate

    [corpus]
    path =                    # existing corpus file; empty means synthesize
    truth =                   # record -> concept file for alignment accuracy
    mapping_truth =           # source<TAB>target[<TAB>package] ground truth
    migrations =              # source sequence<TAB>target sequence test cases
    dedup = false

    [model]                   # any ModelConfig field, plus epochs
    epochs = 15
    hidden_units = 64

    [align]
    direction = both          # s2t, t2s or both
    mutual = false

    [mine]
    threshold = 0.5
    max_phrase_len = 8
    counting = presence       # or multiplicity

    [eval]
    cost_model = levenshtein  # or indel
    ir_stem = false
    ir_stop_words = false

    [output]
    dir = apialign-out
    timestamps = true

Relative paths are taken relative to the working directory. ``--config
demo`` loads the bundled demo configuration.

Exit codes: 0 success, 2 usage or configuration error, 3 data error,
4 numeric failure.
"""
from __future__ import annotations

import argparse
import configparser
import contextlib
import dataclasses
import datetime as _dt
import json
import sys
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Sequence

from . import alignment as al
from . import evaluation as ev
from . import phrases as ph
from .checkpoint import load_checkpoint, save_checkpoint
from .corpus import Corpus, Language, load_corpus, write_corpus
from .errors import ApiAlignError, ConfigError, DataError, NumericError
from .model import JointModel, ModelConfig, embed_corpus, train
from .synthetic import Noise, demo_specs, derive_mapping_truth, generate_synthetic_corpus, load_spec_file

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3, 4

OUTPUT_FILES = {
    "corpus": "corpus.tsv",
    "truth": "truth.tsv",
    "mapping_truth": "mappings.tsv",
    "migrations": "migrations.tsv",
    "checkpoint": "model.ckpt",
    "log": "train.jsonl",
    "pairs": "pairs.tsv",
    "rules": "rules.tsv",
    "report": "report.txt",
}


@dataclass
class PipelineConfig:
    specs: str = "demo"
    synth_seed: int = 7
    n_per_concept: int = 50
    noise: float = 0.05
    corpus: str | None = None
    truth: str | None = None
    mapping_truth: str | None = None
    migrations: str | None = None
    dedup: bool = False
    model: ModelConfig = field(default_factory=ModelConfig)
    epochs: int = 15
    direction: str = "both"
    mutual: bool = False
    threshold: float = 0.5
    max_phrase_len: int = 8
    counting: str = "presence"
    cost_model: str = "levenshtein"
    ir_stem: bool = False
    ir_stop_words: bool = False
    out_dir: str = "apialign-out"
    timestamps: bool = True

    def validate(self) -> None:
        if not 0.0 <= self.threshold < 1.0:
            raise ConfigError(f"threshold must be in [0, 1), got {self.threshold}")
        if self.max_phrase_len < 1:
            raise ConfigError("max_phrase_len must be >= 1")
        if self.direction not in al.DIRECTIONS:
            raise ConfigError(f"direction must be one of {al.DIRECTIONS}, got {self.direction!r}")
        if self.counting not in ("presence", "multiplicity"):
            raise ConfigError(f"counting must be presence or multiplicity, got {self.counting!r}")
        if self.cost_model not in ev.COST_MODELS:
            raise ConfigError(f"cost_model must be one of {ev.COST_MODELS}, got {self.cost_model!r}")
        if self.epochs < 0:
            raise ConfigError("epochs must be >= 0")
        if self.n_per_concept < 1:
            raise ConfigError("n_per_concept must be >= 1")
        Noise.from_rate(self.noise)
        self.model.validate()


_SCHEMA = {
    "synth": {"specs": ("specs", str), "seed": ("synth_seed", int), "n_per_concept": ("n_per_concept", int),
              "noise": ("noise", float)},
    "corpus": {"path": ("corpus", str), "truth": ("truth", str), "mapping_truth": ("mapping_truth", str),
               "migrations": ("migrations", str), "dedup": ("dedup", bool)},
    "align": {"direction": ("direction", str), "mutual": ("mutual", bool)},
    "mine": {"threshold": ("threshold", float), "max_phrase_len": ("max_phrase_len", int),
             "counting": ("counting", str)},
    "eval": {"cost_model": ("cost_model", str), "ir_stem": ("ir_stem", bool),
             "ir_stop_words": ("ir_stop_words", bool)},
    "output": {"dir": ("out_dir", str), "timestamps": ("timestamps", bool)},
}


def _convert(section: configparser.SectionProxy, key: str, kind):
    try:
        if kind is bool:
            return section.getboolean(key)
        raw = section[key].strip()
        if kind is str:
            return raw or None
        return kind(raw)
    except ValueError:
        raise ConfigError(f"[{section.name}] {key}: cannot parse {section[key]!r} as {kind.__name__}") from None


def bundled_config_path() -> Path:
    return Path(str(resources.files("apialign") / "data" / "demo.cfg"))


def load_config(path: str | Path | None) -> PipelineConfig:
    cfg = PipelineConfig()
    if path is None:
        return cfg
    if str(path) == "demo":
        path = bundled_config_path()
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        parser.read(path, encoding="utf-8")
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from None
    model_fields = {f.name: f.type for f in dataclasses.fields(ModelConfig)}
    model_kw = {}
    for name in parser.sections():
        sec = parser[name]
        if name == "model":
            for key in sec:
                if key == "epochs":
                    cfg.epochs = _convert(sec, key, int)
                elif key in model_fields:
                    default = getattr(cfg.model, key)
                    kind = type(default) if not isinstance(default, bool) else bool
                    model_kw[key] = _convert(sec, key, kind)
                else:
                    raise ConfigError(f"{path}: unknown key [model] {key}")
            continue
        if name not in _SCHEMA:
            raise ConfigError(f"{path}: unknown section [{name}]")
        for key in sec:
            if key not in _SCHEMA[name]:
                raise ConfigError(f"{path}: unknown key [{name}] {key}")
            attr, kind = _SCHEMA[name][key]
            value = _convert(sec, key, kind)
            if value is not None or kind is str:
                setattr(cfg, attr, value)
    if model_kw:
        cfg.model = dataclasses.replace(cfg.model, **model_kw)
    return cfg


def apply_overrides(cfg: PipelineConfig, args: argparse.Namespace) -> PipelineConfig:
    if getattr(args, "seed", None) is not None:
        cfg.synth_seed = args.seed
        cfg.model = dataclasses.replace(cfg.model, seed=args.seed)
    if getattr(args, "epochs", None) is not None:
        cfg.epochs = args.epochs
    if getattr(args, "hidden", None) is not None:
        cfg.model = dataclasses.replace(cfg.model, hidden_units=args.hidden)
    for name in ("threshold", "max_phrase_len", "direction", "specs", "out_dir"):
        value = getattr(args, name, None)
        if value is not None:
            setattr(cfg, name, value)
    if getattr(args, "mutual", False):
        cfg.mutual = True
    if getattr(args, "no_timestamps", False):
        cfg.timestamps = False
    return cfg


# -- helpers -----------------------------------------------------------------

@contextlib.contextmanager
def stage(name: str):
    """Prefix errors raised inside a stage with the stage name."""
    try:
        yield
    except ApiAlignError as exc:
        raise type(exc)(f"{name}: {exc}") from exc


def _require_input(path: str | None, what: str) -> Path:
    if not path:
        raise ConfigError(f"{what} path is required")
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"{what} not found: {p}")
    return p


def _require_output(path: str | Path) -> Path:
    p = Path(path)
    if p.exists() and p.is_dir():
        raise ConfigError(f"output path is a directory: {p}")
    if not p.parent.is_dir():
        raise ConfigError(f"output directory does not exist: {p.parent}")
    return p


def _timestamp() -> str:
    return _dt.datetime.now(_dt.timezone.utc).replace(microsecond=0).isoformat()


def _load_specs(cfg: PipelineConfig):
    if cfg.specs == "demo":
        return demo_specs()
    specs, _ = load_spec_file(cfg.specs)
    return specs


def _validate_specs_source(cfg: PipelineConfig) -> None:
    if cfg.specs != "demo":
        _require_input(cfg.specs, "concept spec file")
        _load_specs(cfg)


def read_migrations(path: str | Path) -> list[tuple[list[str], list[str]]]:
    cases = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            f = line.rstrip("\n").split("\t")
            if len(f) != 2 or not f[0].split() or not f[1].split():
                raise DataError(f"{path}:{lineno}: expected source sequence<TAB>target sequence")
            cases.append((f[0].split(), f[1].split()))
    return cases


def write_migrations(specs, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for s in specs:
            fh.write(" ".join(s.source_pattern) + "\t" + " ".join(s.target_pattern) + "\n")


def _corpus_kw(cfg: PipelineConfig) -> dict:
    m = cfg.model
    return dict(max_api_len=m.max_api_len, max_desc_len=m.max_desc_len,
                api_vocab_size=m.api_vocab_size, word_vocab_size=m.word_vocab_size, dedup=cfg.dedup)


def run_synth(cfg: PipelineConfig, out: Path, truth_out: Path, mapping_out: Path | None = None,
              migrations_out: Path | None = None) -> tuple[Corpus, dict]:
    specs = _load_specs(cfg)
    corpus, truth = generate_synthetic_corpus(specs, cfg.n_per_concept, cfg.synth_seed,
                                              Noise.from_rate(cfg.noise), **_corpus_kw(cfg))
    write_corpus(corpus.records, out)
    ev.write_concept_truth(truth, truth_out)
    if mapping_out is not None:
        ev.write_ground_truth(derive_mapping_truth(specs), mapping_out)
    if migrations_out is not None:
        write_migrations(specs, migrations_out)
    return corpus, truth


def run_train(cfg: PipelineConfig, corpus: Corpus, checkpoint: Path, log_path: Path | None,
              resume: bool = False, echo=print) -> JointModel:
    if resume and checkpoint.is_file():
        model = load_checkpoint(checkpoint)
        if model.config.to_dict() != cfg.model.to_dict():
            echo("note: resuming with the checkpoint's model configuration")
        model.config = dataclasses.replace(model.config, early_stop_patience=cfg.model.early_stop_patience)
    else:
        model = JointModel.create(cfg.model, corpus.api_vocab, corpus.word_vocab)
    todo = max(0, cfg.epochs - model.epochs_trained)
    mode = "a" if resume and model.epochs_trained else "w"
    log_fh = open(log_path, mode, encoding="utf-8", newline="\n") if log_path else None
    try:
        def on_epoch(s):
            echo(f"epoch {s.epoch}: loss {s.mean_loss:.6f} per-token {s.token_loss:.6f}")
            if log_fh:
                log_fh.write(json.dumps(s.to_dict(timestamps=cfg.timestamps), sort_keys=True) + "\n")
                log_fh.flush()
        train(model, corpus, todo, on_epoch=on_epoch)
    finally:
        if log_fh:
            log_fh.close()
    save_checkpoint(model, checkpoint)
    return model


def run_align(cfg: PipelineConfig, model: JointModel, corpus: Corpus) -> list[al.AlignedPair]:
    vectors = embed_corpus(model, corpus)
    return al.align_vectors(vectors, direction=cfg.direction, mutual=cfg.mutual)


def aligned_sequences(pairs: Sequence[al.AlignedPair], corpus: Corpus):
    for p in pairs:
        try:
            yield corpus.get(p.source_id).api_sequence, corpus.get(p.target_id).api_sequence
        except KeyError as exc:
            raise DataError(f"aligned pair refers to unknown record {exc.args[0]}") from None


def run_mine(cfg: PipelineConfig, pairs, corpus: Corpus) -> list[ph.MappingRule]:
    tables = ph.extract_phrase_pairs(aligned_sequences(pairs, corpus), cfg.max_phrase_len, cfg.counting)
    return ph.mine_mappings(tables, cfg.threshold)


def evaluate(cfg: PipelineConfig, rules: Sequence[ph.MappingRule], mapping_truth: ev.MappingSet | None,
             migrations: list | None, pairs=None, truth: dict | None = None,
             corpus: Corpus | None = None, history: list | None = None) -> str:
    sections: list[tuple[str, list[str]]] = []
    values: dict[str, object] = {}
    if pairs is not None and truth is not None:
        neural = al.alignment_accuracy(pairs, truth)
        lines = [f"{'direction':<10} {'neural':>8} {'ir':>8}"]
        ir = None
        if corpus is not None:
            ir_run = ev.ir_baseline_align(corpus, "both", cfg.ir_stem, cfg.ir_stop_words)
            ir = al.alignment_accuracy(ir_run.pairs, truth)
            values["ir.skipped"] = len(ir_run.skipped)
        for d, n_acc, i_acc in (("s2t", neural.source_accuracy, ir.source_accuracy if ir else None),
                                ("t2s", neural.target_accuracy, ir.target_accuracy if ir else None)):
            lines.append(f"{d:<10} {ev._pct(n_acc):>8} {ev._pct(i_acc):>8}")
            if n_acc is not None:
                values[f"align.neural.{d}"] = n_acc
            if i_acc is not None:
                values[f"align.ir.{d}"] = i_acc
        values["align.pairs"] = len(pairs)
        sections.append(("alignment accuracy (%)", lines))
    buckets = ph.bucket_counts(rules)
    sections.append(("mapping rules by source phrase length",
                     [f"{k:<6} {v}" for k, v in buckets.items()] + [f"{'total':<6} {len(rules)}"]))
    for k, v in buckets.items():
        values[f"rules.len_{k}"] = v
    values["rules.total"] = len(rules)
    method, classes = ph.one_to_one_mappings(rules)
    values["mappings.method"] = len(method)
    values["mappings.class"] = len(classes)
    if mapping_truth is not None:
        m_report = ev.score_mappings(ev.MappingSet(frozenset((s, t) for s, t, _ in method), "method"),
                                     mapping_truth)
        c_report = ev.score_mappings(ev.MappingSet(frozenset((s, t) for s, t, _ in classes), "class"),
                                     mapping_truth.to_class())
        sections.append(("1-to-1 mappings: precision / recall / F (%)", ev.format_score_table(m_report, c_report)))
        for gran, rep in (("method", m_report), ("class", c_report)):
            for row in rep.rows:
                key = f"score.{gran}.{row.label}"
                values[f"{key}.precision"] = row.precision
                values[f"{key}.recall"] = row.recall
                values[f"{key}.f"] = row.f_score
    if migrations:
        table = ph.best_translations(rules)
        results = [(ph.migrate_sequence(src, table, cfg.max_phrase_len), tgt) for src, tgt in migrations]
        corr = ev.correctness(results)
        edr = ev.edit_distance_ratio(results, cfg.cost_model)
        sections.append(("migration", [f"cases        {len(results)}",
                                       f"correctness  {100 * corr:.1f}%",
                                       f"EDR          {edr:.4f} (cost model: {cfg.cost_model})"]))
        values["migration.cases"] = len(results)
        values["migration.correctness"] = corr
        values[f"migration.edr.{cfg.cost_model}"] = edr
    if history:
        values["train.epochs"] = history[-1]["epoch"]
        values["train.final_token_loss"] = history[-1]["token_loss"]
    return ev.render_report(sections, values, _timestamp() if cfg.timestamps else None)


# -- commands ----------------------------------------------------------------

def cmd_synth(cfg: PipelineConfig, args, echo=print) -> int:
    cfg.validate()
    _validate_specs_source(cfg)
    out = _require_output(args.out)
    truth = _require_output(args.truth or out.with_suffix(".truth.tsv"))
    mapping = _require_output(out.with_suffix(".mappings.tsv"))
    migr = _require_output(out.with_suffix(".migrations.tsv"))
    with stage("synth"):
        corpus, _ = run_synth(cfg, out, truth, mapping, migr)
    echo(f"wrote {len(corpus.records)} records ({corpus.count(Language.SOURCE)} source, "
         f"{corpus.count(Language.TARGET)} target) to {out}")
    return EXIT_OK


def cmd_train(cfg: PipelineConfig, args, echo=print) -> int:
    cfg.validate()
    corpus_path = _require_input(args.corpus or cfg.corpus, "corpus")
    ckpt = _require_output(args.checkpoint)
    log_path = _require_output(args.log) if args.log else None
    with stage("train"):
        corpus = load_corpus(corpus_path, **_corpus_kw(cfg))
        corpus.require_both_languages()
        model = run_train(cfg, corpus, ckpt, log_path, resume=args.resume, echo=echo)
    echo(f"checkpoint written to {ckpt} after {model.epochs_trained} epochs")
    return EXIT_OK


def cmd_align(cfg: PipelineConfig, args, echo=print) -> int:
    cfg.validate()
    corpus_path = _require_input(args.corpus or cfg.corpus, "corpus")
    ckpt = _require_input(args.checkpoint, "checkpoint")
    truth_path = args.truth or cfg.truth
    if truth_path:
        _require_input(truth_path, "truth file")
    out = _require_output(args.out)
    with stage("align"):
        model = load_checkpoint(ckpt)
        corpus = load_corpus(corpus_path, **_corpus_kw(cfg))
        pairs = run_align(cfg, model, corpus)
        al.write_pairs(pairs, out)
    echo(f"wrote {len(pairs)} aligned pairs to {out}")
    if truth_path:
        acc = al.alignment_accuracy(pairs, ev.read_concept_truth(truth_path))
        echo(f"accuracy s2t={acc.source_accuracy} t2s={acc.target_accuracy}")
    return EXIT_OK


def cmd_mine(cfg: PipelineConfig, args, echo=print) -> int:
    cfg.validate()
    corpus_path = _require_input(args.corpus or cfg.corpus, "corpus")
    pairs_path = _require_input(args.pairs, "pairs file")
    out = _require_output(args.out)
    with stage("mine"):
        corpus = load_corpus(corpus_path, **_corpus_kw(cfg))
        pairs = al.read_pairs(pairs_path)
        rules = run_mine(cfg, pairs, corpus)
        ph.write_rules(rules, out)
    echo(f"wrote {len(rules)} rules to {out}")
    for k, v in ph.bucket_counts(rules).items():
        echo(f"  length {k}: {v}")
    return EXIT_OK


def cmd_eval(cfg: PipelineConfig, args, echo=print) -> int:
    cfg.validate()
    rules_path = _require_input(args.rules, "rules file")
    gt_path = args.ground_truth or cfg.mapping_truth
    if gt_path:
        _require_input(gt_path, "ground truth")
    migr_path = args.migrations or cfg.migrations
    if migr_path:
        _require_input(migr_path, "migrations file")
    pairs_path = args.pairs
    truth_path = args.truth or cfg.truth
    corpus_path = args.corpus or cfg.corpus
    if pairs_path:
        _require_input(pairs_path, "pairs file")
        _require_input(truth_path, "truth file")
    if corpus_path:
        _require_input(corpus_path, "corpus")
    out = _require_output(args.report) if args.report else None
    with stage("eval"):
        rules = ph.read_rules(rules_path)
        gt = ev.read_ground_truth(gt_path) if gt_path else None
        migrations = read_migrations(migr_path) if migr_path else None
        pairs = al.read_pairs(pairs_path) if pairs_path else None
        truth = ev.read_concept_truth(truth_path) if pairs_path else None
        corpus = load_corpus(corpus_path, **_corpus_kw(cfg)) if corpus_path and pairs_path else None
        report = evaluate(cfg, rules, gt, migrations, pairs, truth, corpus)
    if out:
        out.write_text(report, encoding="utf-8")
    echo(report, end="")
    return EXIT_OK


def cmd_pipeline(cfg: PipelineConfig, args, echo=print) -> int:
    cfg.validate()
    if cfg.corpus:
        _require_input(cfg.corpus, "corpus")
        for name in ("truth", "mapping_truth", "migrations"):
            if getattr(cfg, name):
                _require_input(getattr(cfg, name), name.replace("_", " "))
    else:
        _validate_specs_source(cfg)
    out_dir = Path(cfg.out_dir)
    if out_dir.exists() and not out_dir.is_dir():
        raise ConfigError(f"output path is not a directory: {out_dir}")
    out_dir.mkdir(parents=True, exist_ok=True)
    files = {k: out_dir / v for k, v in OUTPUT_FILES.items()}
    if cfg.corpus:
        with stage("load"):
            corpus = load_corpus(cfg.corpus, **_corpus_kw(cfg))
        truth = ev.read_concept_truth(cfg.truth) if cfg.truth else None
        gt = ev.read_ground_truth(cfg.mapping_truth) if cfg.mapping_truth else None
        migrations = read_migrations(cfg.migrations) if cfg.migrations else None
    else:
        with stage("synth"):
            corpus, truth = run_synth(cfg, files["corpus"], files["truth"], files["mapping_truth"],
                                      files["migrations"])
        gt = ev.read_ground_truth(files["mapping_truth"])
        migrations = read_migrations(files["migrations"])
        echo(f"synth: {len(corpus.records)} records")
    with stage("train"):
        corpus.require_both_languages()
        model = run_train(cfg, corpus, files["checkpoint"], files["log"], echo=echo)
    with stage("align"):
        pairs = run_align(cfg, model, corpus)
        al.write_pairs(pairs, files["pairs"])
    with stage("mine"):
        rules = run_mine(cfg, pairs, corpus)
        ph.write_rules(rules, files["rules"])
    with stage("eval"):
        report = evaluate(cfg, rules, gt, migrations, pairs, truth, corpus, model.history)
    files["report"].write_text(report, encoding="utf-8")
    echo(report, end="")
    echo(f"outputs in {out_dir}")
    return EXIT_OK


COMMANDS = {"synth": cmd_synth, "train": cmd_train, "align": cmd_align, "mine": cmd_mine,
            "eval": cmd_eval, "pipeline": cmd_pipeline}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="apialign", description="Mine cross-language API mappings.")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="INI config file, or 'demo' for the bundled one")
    common.add_argument("--seed", type=int)
    common.add_argument("--no-timestamps", action="store_true", help="omit timestamps from logs and reports")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", parents=[common], help="generate a synthetic bilingual corpus")
    p.add_argument("--specs", help="JSON concept spec file, or 'demo'")
    p.add_argument("--out", required=True)
    p.add_argument("--truth", help="record to concept file (default: <out>.truth.tsv)")

    p = sub.add_parser("train", parents=[common], help="train the joint model")
    p.add_argument("--corpus")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--log", help="JSON-lines training log")
    p.add_argument("--epochs", type=int)
    p.add_argument("--hidden", type=int)
    p.add_argument("--resume", action="store_true", help="continue from --checkpoint up to --epochs total")

    p = sub.add_parser("align", parents=[common], help="align records by semantic vectors")
    p.add_argument("--corpus")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--truth")
    p.add_argument("--direction", choices=al.DIRECTIONS)
    p.add_argument("--mutual", action="store_true")

    p = sub.add_parser("mine", parents=[common], help="mine mapping rules from aligned pairs")
    p.add_argument("--corpus")
    p.add_argument("--pairs", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--threshold", type=float)
    p.add_argument("--max-phrase-len", type=int, dest="max_phrase_len")

    p = sub.add_parser("eval", parents=[common], help="score rules, migrations and alignments")
    p.add_argument("--rules", required=True)
    p.add_argument("--ground-truth", dest="ground_truth")
    p.add_argument("--migrations")
    p.add_argument("--pairs")
    p.add_argument("--truth")
    p.add_argument("--corpus")
    p.add_argument("--report")

    p = sub.add_parser("pipeline", parents=[common], help="synth/load, train, align, mine and eval")
    p.add_argument("--out-dir", dest="out_dir")
    p.add_argument("--epochs", type=int)
    p.add_argument("--hidden", type=int)
    p.add_argument("--threshold", type=float)
    p.add_argument("--max-phrase-len", type=int, dest="max_phrase_len")
    p.add_argument("--direction", choices=al.DIRECTIONS)
    p.add_argument("--mutual", action="store_true")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = apply_overrides(load_config(args.config), args)
        return COMMANDS[args.command](cfg, args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
