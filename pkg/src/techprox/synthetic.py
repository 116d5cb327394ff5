"""Synthetic work records with a planted convergence between two technologies.

Three technologies share a 180-month range (2007-01 .. 2021-12). Before
month ``ramp_start`` the first two ("Public-key cryptography" and
"Blockchain") rarely overlap; afterwards an increasing share of their papers
is attributed to both, uses bridge keywords, has bridge authors and cites
the other side. The third technology never links to the others and serves as
the control. A handful of dirty records (no references, no catalog concept,
duplicates, bad dates, January-1st dates) exercise refinement.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from techprox.corpus import MonthKey, RawWork, TechnologyCatalog

PKC, CHAIN, STEGO = "C100001", "C100002", "C100003"
CATALOG = TechnologyCatalog(
    technologies=(
        (PKC, "Public-key cryptography"),
        (CHAIN, "Blockchain"),
        (STEGO, "Steganography"),
    ),
    start=MonthKey(2007, 1),
    end=MonthKey(2021, 12),
)
OTHER_CONCEPT = "C999999"

VOCAB = {
    PKC: ["rsa", "lattice", "elliptic", "pairing", "hellman", "factoring"],
    CHAIN: ["blockchain", "consensus", "ledger", "mining", "cryptocurrency", "sharding"],
    STEGO: ["steganography", "watermark", "payload", "cover", "embedding", "steganalysis"],
}
BRIDGE_VOCAB = ["signature", "zeroknowledge", "wallet", "multisig", "commitment"]


@dataclass(frozen=True)
class SyntheticSpec:
    n_papers: int = 200
    ramp_start: int = 120
    seed: int = 7
    n_dirty: int = 16
    n_control: int = 24


def _month_weights(n_months: int, ramp_start: int) -> np.ndarray:
    t = np.arange(n_months)
    progress = np.clip((t - ramp_start) / (n_months - 1 - ramp_start), 0, None)
    w = np.where(t < ramp_start, 0.6, 1.0 + 4.0 * progress)
    return w / w.sum()


def _text(rng: np.random.Generator, words: list[str], counts: list[int]) -> str:
    tokens = [w for w, c in zip(words, counts) for _ in range(c)]
    rng.shuffle(tokens)
    # "and" is a stopword, so no bigrams form across topic words
    return " and ".join(tokens)


def _inverted(text: str) -> dict[str, list[int]]:
    out: dict[str, list[int]] = {}
    for pos, word in enumerate(text.split()):
        out.setdefault(word, []).append(pos)
    return out


def generate_works(spec: SyntheticSpec = SyntheticSpec()) -> list[RawWork]:
    """Clean records in publication order, followed by the dirty ones.

    The planted pair's papers get denser after ``ramp_start`` and an
    increasing share of them is attributed to both technologies. Before the
    ramp a minority carries a weak secondary attribution, so the pair is
    observable but quiet. Control papers are spread uniformly over the range.
    """
    rng = np.random.default_rng(spec.seed)
    n_months = CATALOG.end - CATALOG.start + 1
    n_pair = spec.n_papers - spec.n_dirty - spec.n_control
    placed = [(int(m), "pair") for m in rng.choice(n_months, size=n_pair, p=_month_weights(n_months, spec.ramp_start))]
    placed += [(int(m), STEGO) for m in rng.integers(0, n_months, size=spec.n_control)]
    placed.sort()
    pools = {
        PKC: [f"A1{i:03d}" for i in range(20)],
        CHAIN: [f"A2{i:03d}" for i in range(20)],
        STEGO: [f"A3{i:03d}" for i in range(12)],
    }
    bridge_authors = [f"A9{i:03d}" for i in range(6)]

    works: list[RawWork] = []
    months: list[int] = []
    family: list[str] = []
    bridged: list[bool] = []
    for idx, (m, group) in enumerate(placed):
        month = CATALOG.start.shift(m)
        tech = str(rng.choice([PKC, CHAIN])) if group == "pair" else STEGO
        other = {PKC: CHAIN, CHAIN: PKC}.get(tech)
        scores = {tech: round(float(rng.uniform(0.4, 0.9)), 4)}
        late = m >= spec.ramp_start
        progress = max(0.0, (m - spec.ramp_start) / (n_months - 1 - spec.ramp_start))
        is_bridge = False
        if other is not None:
            p_bridge = 0.5 + 0.45 * progress if late else 0.45
            if rng.random() < p_bridge:
                is_bridge = True
                lo, hi = (0.25, 0.6) if late else (0.02, 0.1)
                scores[other] = round(float(rng.uniform(lo, hi)), 4)

        words = list(rng.choice(VOCAB[tech], size=3, replace=False))
        counts = [int(c) for c in rng.integers(1, 4, size=3)]
        if is_bridge and late:
            bw = list(rng.choice(BRIDGE_VOCAB, size=2, replace=False))
            words += bw + [str(rng.choice(VOCAB[other]))]
            counts += [int(c) for c in rng.integers(3, 5, size=2)] + [1]
        abstract = _text(rng, words, counts)
        title = f"{words[0]} {'for' if len(words) > 3 else 'in'} {words[-1]}"

        authors = list(rng.choice(pools[tech], size=int(rng.integers(1, 4)), replace=False))
        if is_bridge and late:
            authors += list(rng.choice(bridge_authors, size=int(rng.integers(1, 3)), replace=False))

        refs = [f"W8{idx:05d}"]  # a work outside the corpus
        same = [j for j in range(len(works)) if family[j] == tech or
                (other is not None and family[j] == other and (is_bridge or bridged[j]))]
        recent = ([j for j in same if m - months[j] <= 6]
                  or [j for j in same if m - months[j] <= 24] or same)
        if recent:
            n_refs = min(len(recent), int(rng.integers(2, 6)))
            weights = np.array([5.0 if bridged[j] and is_bridge else 1.0 for j in recent])
            picks = rng.choice(recent, size=n_refs, replace=False, p=weights / weights.sum())
            refs += [works[j].work_id for j in sorted(picks)]

        day = 1 if rng.random() < 0.06 and month.month == 1 else int(rng.integers(2, 29))
        concepts = tuple(scores.items()) + ((OTHER_CONCEPT, round(float(rng.uniform(0.1, 0.5)), 4)),)
        works.append(RawWork(
            work_id=f"W1{idx:05d}",
            title=title,
            abstract_inverted_index=_inverted(abstract),
            publication_date=f"{month.year:04d}-{month.month:02d}-{day:02d}",
            authorships=tuple((a, f"Author {a}") for a in authors),
            referenced_works=tuple(refs),
            concepts=concepts,
        ))
        months.append(m)
        family.append(tech)
        bridged.append(is_bridge)

    works.extend(_dirty(rng, works, spec.n_dirty))
    return works


def _dirty(rng: np.random.Generator, clean: list[RawWork], n: int) -> list[RawWork]:
    out = []
    for i in range(n):
        base = clean[int(rng.integers(len(clean)))]
        kind = i % 4
        if kind == 0:
            out.append(RawWork(f"W7{i:05d}", base.title, base.abstract_inverted_index,
                               base.publication_date, base.authorships, (), base.concepts))
        elif kind == 1:
            out.append(RawWork(f"W7{i:05d}", base.title, base.abstract_inverted_index,
                               base.publication_date, base.authorships, base.referenced_works,
                               ((OTHER_CONCEPT, 0.8),)))
        elif kind == 2:
            # less complete duplicate of an existing work
            out.append(RawWork(base.work_id, base.title, None, base.publication_date,
                               (), base.referenced_works, base.concepts))
        else:
            out.append(RawWork(f"W7{i:05d}", base.title, base.abstract_inverted_index,
                               "not-a-date", base.authorships, base.referenced_works, base.concepts))
    return out


def generate_external_corpus(n_series: int = 60, seed: int = 11) -> dict[str, np.ndarray]:
    """Ragged-length shape families standing in for a large external series corpus."""
    rng = np.random.default_rng(seed)
    out = {}
    for i in range(n_series):
        n = int(rng.integers(60, 240))
        t = np.linspace(0, 1, n)
        shape = i % 4
        if shape == 0:
            y = t
        elif shape == 1:
            y = 1 - t
        elif shape == 2:
            y = 0.5 + 0.5 * np.sin(2 * np.pi * rng.uniform(1, 4) * t)
        else:
            y = np.exp(-((t - rng.uniform(0.3, 0.7)) ** 2) / 0.02)
        out[f"ext{i:03d}"] = np.clip(y + rng.normal(0, 0.03, n), 0, None)
    return out


def external_to_csv(corpus: dict[str, np.ndarray]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    for sid, values in corpus.items():
        w.writerow([sid] + [f"{v:.6f}" for v in values])
    return buf.getvalue()

