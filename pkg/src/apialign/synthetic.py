"""Synthetic bilingual corpora with known ground truth.

A concept pairs a source-language API pattern with a target-language
pattern and gives each language its own set of description paraphrases.
Generated records carry their concept id so that alignments and mined
mappings can be scored exactly.

Concept spec files are JSON::

    {
      "seed": 7,                      # optional, default 0
      "n_per_concept": 50,            # optional, records per concept per language
      "noise": 0.05,                  # optional default for every concept: a total
                                      # per-token rate, or {"insert": p, "substitute": q}
      "concepts": [
        {
          "id": "read_file",
          "package": "java.io",       # optional, used for per-package scoring
          "source": ["File.new", "BufferedReader.new", ...],
          "target": ["FileInfo.new", "StreamReader.new", ...],
          "paraphrases": {"SOURCE": ["read file", "load document"],
                          "TARGET": ["read document", "load file"]},
          "noise": {"insert": 0.0, "substitute": 0.0}   # optional override
        }
      ]
    }
"""
from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .corpus import Corpus, Language, SnippetRecord, build_corpus
from .errors import ConfigError


@dataclass(frozen=True)
class Noise:
    insert: float = 0.0
    substitute: float = 0.0

    def __post_init__(self):
        for name in ("insert", "substitute"):
            p = getattr(self, name)
            if not 0.0 <= p < 1.0:
                raise ConfigError(f"noise.{name} must be in [0, 1), got {p}")

    @classmethod
    def from_rate(cls, rate: float) -> "Noise":
        """A single per-token corruption rate, split evenly between
        substitution and insertion."""
        return cls(rate / 2, rate / 2)

    @classmethod
    def parse(cls, value) -> "Noise":
        """Accept a number (total rate) or an ``{insert, substitute}`` mapping."""
        if isinstance(value, (int, float)) and not isinstance(value, bool):
            return cls.from_rate(float(value))
        if isinstance(value, dict):
            return cls(**value)
        raise ConfigError(f"noise must be a number or a mapping, got {value!r}")


@dataclass(frozen=True)
class ConceptSpec:
    concept_id: str
    source_pattern: tuple[str, ...]
    target_pattern: tuple[str, ...]
    paraphrases: dict[Language, tuple[tuple[str, ...], ...]]
    noise: Noise = field(default_factory=Noise)
    package: str | None = None

    def __post_init__(self):
        if not self.source_pattern or not self.target_pattern:
            raise ConfigError(f"concept {self.concept_id}: empty API pattern")
        if set(self.source_pattern) & set(self.target_pattern):
            raise ConfigError(f"concept {self.concept_id}: source and target patterns share tokens")
        for lang in Language:
            phrases = self.paraphrases.get(lang, ())
            if len(phrases) < 2:
                raise ConfigError(f"concept {self.concept_id}: {lang.value} needs at least 2 paraphrases")
            if any(not p for p in phrases):
                raise ConfigError(f"concept {self.concept_id}: empty paraphrase")

    def pattern(self, language: Language) -> tuple[str, ...]:
        return self.source_pattern if language is Language.SOURCE else self.target_pattern


def validate_specs(specs: Sequence[ConceptSpec]) -> None:
    if not specs:
        raise ConfigError("no concept specs given")
    ids = [s.concept_id for s in specs]
    if len(set(ids)) != len(ids):
        raise ConfigError("duplicate concept ids")
    src = {t for s in specs for t in s.source_pattern}
    tgt = {t for s in specs for t in s.target_pattern}
    shared = src & tgt
    if shared:
        raise ConfigError(f"source and target API namespaces overlap: {sorted(shared)[:5]}")


def _apply_noise(pattern, noise: Noise, pool, rng) -> list[str]:
    out = []
    for tok in pattern:
        if noise.substitute and rng.random() < noise.substitute:
            choices = [t for t in pool if t != tok]
            if choices:
                tok = choices[rng.integers(len(choices))]
        out.append(tok)
        if noise.insert and rng.random() < noise.insert:
            out.append(pool[rng.integers(len(pool))])
    return out


def generate_records(specs: Sequence[ConceptSpec], n_per_concept: int, seed: int = 0,
                     noise: Noise | None = None) -> tuple[list[SnippetRecord], dict[str, str]]:
    """Emit ``n_per_concept`` records per concept per language.

    Record order is shuffled per language before ids are assigned so that
    id order carries no concept information. ``noise`` overrides every
    spec's own noise rates when given.
    """
    validate_specs(specs)
    if n_per_concept < 1:
        raise ConfigError(f"n_per_concept must be >= 1, got {n_per_concept}")
    rng = np.random.default_rng(seed)
    records: list[SnippetRecord] = []
    truth: dict[str, str] = {}
    for lang in Language:
        pool = sorted({t for s in specs for t in s.pattern(lang)})
        drafts = []
        for spec in specs:
            rates = noise if noise is not None else spec.noise
            phrases = spec.paraphrases[lang]
            for _ in range(n_per_concept):
                api = _apply_noise(spec.pattern(lang), rates, pool, rng)
                desc = phrases[rng.integers(len(phrases))]
                drafts.append((spec.concept_id, tuple(api), desc))
        order = rng.permutation(len(drafts))
        prefix = "S" if lang is Language.SOURCE else "T"
        for k, j in enumerate(order):
            concept_id, api, desc = drafts[j]
            rec_id = f"{prefix}{k:06d}"
            records.append(SnippetRecord(rec_id, lang, api, desc, provenance=f"synthetic:{concept_id}"))
            truth[rec_id] = concept_id
    return records, truth


def generate_synthetic_corpus(specs: Sequence[ConceptSpec], n_per_concept: int, seed: int = 0,
                              noise: Noise | None = None, **corpus_kw) -> tuple[Corpus, dict[str, str]]:
    records, truth = generate_records(specs, n_per_concept, seed, noise)
    corpus = build_corpus(records, **corpus_kw)
    kept = {r.id for r in corpus.records}
    return corpus, {k: v for k, v in truth.items() if k in kept}


def derive_mapping_truth(specs: Sequence[ConceptSpec]) -> list[tuple[str, str, str | None]]:
    """Method-level truth from position-aligned patterns of equal length."""
    seen = {}
    for spec in specs:
        if len(spec.source_pattern) != len(spec.target_pattern):
            continue
        for s, t in zip(spec.source_pattern, spec.target_pattern):
            seen.setdefault((s, t), spec.package)
    return sorted((s, t, pkg) for (s, t), pkg in seen.items())


def _split_phrases(items) -> tuple[tuple[str, ...], ...]:
    return tuple(tuple(p.split()) if isinstance(p, str) else tuple(p) for p in items)


def specs_from_dict(doc: dict) -> tuple[list[ConceptSpec], dict]:
    """Parse a spec document; returns (specs, options) where options holds
    ``seed``, ``n_per_concept`` and the default ``noise``."""
    try:
        default_noise = Noise.parse(doc.get("noise", {}))
        specs = []
        for c in doc["concepts"]:
            specs.append(ConceptSpec(
                concept_id=str(c["id"]),
                source_pattern=tuple(c["source"]),
                target_pattern=tuple(c["target"]),
                paraphrases={Language(k): _split_phrases(v) for k, v in c["paraphrases"].items()},
                noise=Noise.parse(c["noise"]) if "noise" in c else default_noise,
                package=c.get("package"),
            ))
    except KeyError as exc:
        raise ConfigError(f"invalid concept spec document: missing key {exc.args[0]!r}") from None
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"invalid concept spec document: {exc}") from None
    validate_specs(specs)
    options = {
        "seed": int(doc.get("seed", 0)),
        "n_per_concept": int(doc.get("n_per_concept", 50)),
        "noise": default_noise,
    }
    return specs, options


def specs_to_dict(specs: Sequence[ConceptSpec], seed: int = 0, n_per_concept: int = 50,
                  noise: Noise | None = None) -> dict:
    doc: dict = {"seed": seed, "n_per_concept": n_per_concept}
    if noise is not None:
        doc["noise"] = {"insert": noise.insert, "substitute": noise.substitute}
    concepts = []
    for s in specs:
        c = {"id": s.concept_id}
        if s.package:
            c["package"] = s.package
        c["source"] = list(s.source_pattern)
        c["target"] = list(s.target_pattern)
        c["paraphrases"] = {lang.value: [" ".join(p) for p in s.paraphrases[lang]] for lang in Language}
        if noise is None or s.noise != noise:
            c["noise"] = {"insert": s.noise.insert, "substitute": s.noise.substitute}
        concepts.append(c)
    doc["concepts"] = concepts
    return doc


def load_spec_file(path: str | Path) -> tuple[list[ConceptSpec], dict]:
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"concept spec file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON: {exc}") from None
    return specs_from_dict(doc)


def save_spec_file(path: str | Path, specs: Sequence[ConceptSpec], **options) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(specs_to_dict(specs, **options), fh, indent=2)
        fh.write("\n")


# Surface words per meaning. Several words serve more than one meaning
# ("get", "load", "link", "drop", "string", "read"), so a description on its
# own is often ambiguous between concepts.
SYNONYMS = {
    "read": ("read", "load", "get"),
    "write": ("write", "save", "put"),
    "delete": ("delete", "remove", "drop"),
    "check": ("check", "test", "has"),
    "get": ("get", "fetch", "find"),
    "open": ("open", "start", "load"),
    "parse": ("parse", "convert", "read"),
    "create": ("create", "build", "new"),
    "close": ("close", "release", "drop"),
    "file": ("file", "document", "path"),
    "url": ("url", "link", "address"),
    "list": ("list", "array", "collection"),
    "map": ("map", "dictionary", "table"),
    "text": ("text", "string", "number"),
    "hash": ("hash", "digest", "checksum"),
    "connection": ("connection", "link", "database"),
    "date": ("date", "time", "string"),
}

# (concept id, package, action, object, source pattern, target pattern);
# patterns are position aligned so they double as method-level truth.
DEMO_CONCEPTS = [
    ("read_file", "java.io", "read", "file",
     "File.new FileReader.new BufferedReader.new BufferedReader.readLine BufferedReader.close",
     "FileInfo.new FileStream.new StreamReader.new StreamReader.ReadLine StreamReader.Close"),
    ("write_file", "java.io", "write", "file",
     "File.new FileWriter.new BufferedWriter.new BufferedWriter.write BufferedWriter.close",
     "FileInfo.new FileStream.new StreamWriter.new StreamWriter.Write StreamWriter.Close"),
    ("delete_file", "java.io", "delete", "file",
     "File.new File.exists File.delete File.getName",
     "FileInfo.new FileInfo.Exists FileInfo.Delete FileInfo.Name"),
    ("check_file", "java.io", "check", "file",
     "File.new File.exists File.isDirectory File.isFile",
     "FileInfo.new FileInfo.Exists Directory.Exists File.Exists"),
    ("get_file", "java.io", "get", "file",
     "File.new File.getAbsolutePath File.length File.lastModified",
     "FileInfo.new FileInfo.FullName FileInfo.Length FileInfo.LastWriteTime"),
    ("read_url", "java.net", "read", "url",
     "URL.new URL.openStream InputStreamReader.new BufferedReader.readLine BufferedReader.close",
     "Uri.new WebClient.OpenRead StreamReader.new StreamReader.ReadLine StreamReader.Close"),
    ("open_url", "java.net", "open", "url",
     "URL.new URL.openConnection HttpURLConnection.setRequestMethod HttpURLConnection.connect",
     "Uri.new WebRequest.Create HttpWebRequest.Method HttpWebRequest.GetResponse"),
    ("parse_url", "java.net", "parse", "url",
     "URL.new URL.getProtocol URL.getHost URL.getPort",
     "Uri.new Uri.Scheme Uri.Host Uri.Port"),
    ("create_list", "java.util", "create", "list",
     "ArrayList.new ArrayList.add ArrayList.add ArrayList.size",
     "List.new List.Add List.Add List.Count"),
    ("get_list", "java.util", "get", "list",
     "ArrayList.new ArrayList.add ArrayList.get ArrayList.indexOf",
     "List.new List.Add List.ElementAt List.IndexOf"),
    ("check_list", "java.util", "check", "list",
     "ArrayList.new ArrayList.isEmpty ArrayList.contains ArrayList.remove",
     "List.new List.Any List.Contains List.Remove"),
    ("create_map", "java.util", "create", "map",
     "HashMap.new HashMap.put HashMap.put HashMap.size",
     "Dictionary.new Dictionary.Add Dictionary.Add Dictionary.Count"),
    ("get_map", "java.util", "get", "map",
     "HashMap.new HashMap.put HashMap.get HashMap.keySet",
     "Dictionary.new Dictionary.Add Dictionary.TryGetValue Dictionary.Keys"),
    ("check_map", "java.util", "check", "map",
     "HashMap.new HashMap.containsKey HashMap.containsValue HashMap.remove",
     "Dictionary.new Dictionary.ContainsKey Dictionary.ContainsValue Dictionary.Remove"),
    ("create_text", "java.lang", "create", "text",
     "StringBuilder.new StringBuilder.append StringBuilder.append StringBuilder.toString",
     "StringBuilder.New StringBuilder.Append StringBuilder.Append StringBuilder.ToString"),
    ("parse_text", "java.lang", "parse", "text",
     "String.trim Integer.parseInt Integer.valueOf Integer.toString",
     "String.Trim Int32.Parse Convert.ToInt32 Int32.ToString"),
    ("create_hash", "java.security", "create", "hash",
     "MessageDigest.getInstance MessageDigest.update MessageDigest.digest BigInteger.new",
     "MD5.Create MD5.TransformBlock MD5.ComputeHash BitConverter.ToString"),
    ("open_connection", "java.sql", "open", "connection",
     "DriverManager.getConnection Connection.prepareStatement PreparedStatement.executeQuery ResultSet.next",
     "SqlConnection.Open SqlCommand.new SqlCommand.ExecuteReader SqlDataReader.Read"),
    ("close_connection", "java.sql", "close", "connection",
     "DriverManager.getConnection Connection.setAutoCommit Connection.commit Connection.close",
     "SqlConnection.Open SqlConnection.BeginTransaction SqlTransaction.Commit SqlConnection.Close"),
    ("parse_date", "java.text", "parse", "date",
     "SimpleDateFormat.new SimpleDateFormat.parse Date.getTime Calendar.getInstance",
     "DateTimeFormatInfo.new DateTime.ParseExact DateTime.Ticks DateTime.Now"),
]


def demo_paraphrases(action: str, obj: str) -> tuple[tuple[str, str], ...]:
    """Every unordered pair of distinct surface words for the concept."""
    words = list(dict.fromkeys(SYNONYMS[action] + SYNONYMS[obj]))
    return tuple(itertools.combinations(words, 2))


def demo_specs(noise: Noise | None = None) -> list[ConceptSpec]:
    """The 20-concept demo set.

    Both languages draw descriptions from the same per-concept pool, two
    surface words per record, so paired records usually share no word and
    many descriptions fit several concepts.
    """
    noise = noise or Noise()
    specs = []
    for cid, pkg, action, obj, src, tgt in DEMO_CONCEPTS:
        phr = demo_paraphrases(action, obj)
        specs.append(ConceptSpec(
            cid, tuple(src.split()), tuple(tgt.split()),
            {Language.SOURCE: phr, Language.TARGET: phr},
            noise, pkg,
        ))
    return specs
