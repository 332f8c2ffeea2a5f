"""Predictors, evaders, game adjudication, and trace-based prediction.

A predictor is a pair (D, pi): a strictly increasing decidable index
sequence plus a prediction rule consulted only at members of D with a
prefix of exactly that length. Games are finite and exact: the report
ledgers every mismatch below the horizon. All values are naturals.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

from .errors import (
    BudgetExceeded,
    MalformedTrace,
    ParseError,
    PreconditionError,
    step_budget,
)


@dataclass
class Predictor:
    """(D, pi) with optional exact knowledge of pi's reach over bounded
    prefixes.

    ``domain(k)`` is the k-th element of D (None once exhausted, for
    finite-stage predictors). ``predict(n, prefix)`` returns the guess or
    None for undefined. ``prefix_value_bound(n, k)``, when present,
    returns an exact upper bound (attained or not) on pi_n over all
    prefixes with entries below k; evaders use it in place of brute
    enumeration.
    """

    name: str
    domain: Callable[[int], Optional[int]]
    predict: Callable[[int, tuple[int, ...]], Optional[int]]
    prefix_value_bound: Optional[Callable[[int, int], int]] = None

    def domain_members(self, horizon: int) -> list[int]:
        """D intersected with [0, horizon), validating strict increase."""
        out: list[int] = []
        prev = -1
        for k in itertools.count():
            n = self.domain(k)
            if n is None:
                break
            if n <= prev:
                raise PreconditionError(f"{self.name}: D not strictly increasing")
            if n >= horizon:
                break
            out.append(n)
            prev = n
        return out


def zero_predictor() -> Predictor:
    """Predicts 0 everywhere, D = all naturals."""
    return constant_predictor(0, "zero")


def constant_predictor(value: int, name: str | None = None) -> Predictor:
    # The rule is constant, so its reach over any prefix set is exact.
    return Predictor(name or f"const:{value}", lambda k: k,
                     lambda n, sigma: value,
                     prefix_value_bound=lambda n, k: value)


PREDICTED = "predicted-so-far"
EVADED = "evaded-inf-often-witness"


@dataclass(frozen=True)
class GameVerdict:
    kind: str
    count: int


@dataclass(frozen=True)
class GameReport:
    """Exact mismatch ledger of one prediction game.

    ``mismatches`` lists D-points where the guess was wrong;
    ``undefined_hits`` lists D-points where the rule gave no guess. Both
    count against the predictor. The verdict is a finite-horizon proxy:
    a run whose failures keep occurring in the last quarter of the
    inspected D-points is flagged as evading.
    """

    horizon: int
    inspected: tuple[int, ...]
    mismatches: tuple[int, ...]
    undefined_hits: tuple[int, ...]
    verdict: GameVerdict

    @property
    def effective_mismatches(self) -> tuple[int, ...]:
        return tuple(sorted(set(self.mismatches) | set(self.undefined_hits)))

    @property
    def mismatch_count(self) -> int:
        return len(self.effective_mismatches)

    def to_dict(self) -> dict:
        return {
            "horizon": self.horizon,
            "inspected": len(self.inspected),
            "mismatches": list(self.mismatches),
            "undefined_hits": list(self.undefined_hits),
            "verdict": {"kind": self.verdict.kind, "count": self.verdict.count},
        }


def _as_values(x, horizon: int) -> list[int]:
    if callable(x):
        return [x(n) for n in range(horizon)]
    vals = list(x)
    if len(vals) < horizon:
        raise PreconditionError("x must be total on [0, horizon)")
    return vals[:horizon]


def play_game(P: Predictor, x, horizon: int) -> GameReport:
    """Run the prediction game below the horizon and ledger the result."""
    if horizon < 1:
        raise PreconditionError("horizon must be >= 1")
    values = _as_values(x, horizon)
    inspected: list[int] = []
    mismatches: list[int] = []
    undefined: list[int] = []
    for n in P.domain_members(horizon):
        inspected.append(n)
        guess = P.predict(n, tuple(values[:n]))
        if guess is None:
            undefined.append(n)
        elif guess != values[n]:
            mismatches.append(n)
    failures = sorted(set(mismatches) | set(undefined))
    if inspected and failures:
        tail_start = inspected[(3 * len(inspected)) // 4]
        if any(n >= tail_start for n in failures):
            verdict = GameVerdict(EVADED, len(failures))
        else:
            verdict = GameVerdict(PREDICTED, len(failures))
    else:
        verdict = GameVerdict(PREDICTED, len(failures))
    return GameReport(horizon, tuple(inspected), tuple(mismatches),
                      tuple(undefined), verdict)


# -- library predictors ----------------------------------------------------


class _FuncTable:
    """Lazily tabulated values and running maxima of a function library,
    with pairwise first-divergence bookkeeping."""

    def __init__(self, funcs: Sequence[Callable[[int], int]]):
        self.funcs = list(funcs)
        self.vals: list[list[int]] = [[] for _ in funcs]
        self.running_max: list[list[int]] = [[] for _ in funcs]
        self._first_diff: dict[tuple[int, int], int] = {}
        self._agree_len: dict[tuple[int, int], int] = {}

    def value(self, e: int, n: int) -> int:
        col = self.vals[e]
        while len(col) <= n:
            v = self.funcs[e](len(col))
            if v < 0:
                raise PreconditionError("library functions must take natural values")
            self.running_max[e].append(max(v, self.running_max[e][-1]) if col else v)
            col.append(v)
        return col[n]

    def prefix(self, e: int, n: int) -> tuple[int, ...]:
        if n > 0:
            self.value(e, n - 1)
        return tuple(self.vals[e][:n])

    def max_below(self, e: int, n: int) -> int:
        """max of the first n values (0 for an empty prefix)."""
        if n == 0:
            return 0
        self.value(e, n - 1)
        return self.running_max[e][n - 1]

    def agree_through(self, a: int, b: int, n: int) -> bool:
        """Do members a and b share their length-n prefixes?"""
        if a == b:
            return True
        key = (a, b) if a < b else (b, a)
        f = self._first_diff.get(key)
        if f is not None:
            return f >= n
        c = self._agree_len.get(key, 0)
        while c < n:
            if self.value(key[0], c) != self.value(key[1], c):
                self._first_diff[key] = c
                return False
            c += 1
        self._agree_len[key] = c
        return True


def predictor_from_library(funcs: Sequence[Callable[[int], int]],
                           name: str = "lib") -> Predictor:
    """First-match predictor over an ordered library of total functions.

    D is all naturals; the guess at n under prefix sigma comes from the
    least library member whose length-n prefix equals sigma, undefined
    when none matches.
    """
    if not funcs:
        raise PreconditionError("library must be nonempty")
    table = _FuncTable(funcs)
    count = len(table.funcs)

    def predict(n: int, sigma: tuple[int, ...]) -> Optional[int]:
        if len(sigma) != n:
            raise PreconditionError("prefix length must equal n")
        for e in range(count):
            if table.prefix(e, n) == sigma:
                return table.value(e, n)
        return None

    def prefix_value_bound(n: int, k: int) -> int:
        """Exact max of pi_n over prefixes with entries below k.

        Only prefixes equal to some member's own prefix are matched at
        all; each such prefix is answered by its least matching member.
        """
        best = 0
        for e in range(count):
            if table.max_below(e, n) >= k:
                continue
            winner = next(e2 for e2 in range(count)
                          if table.agree_through(e2, e, n))
            best = max(best, table.value(winner, n))
        return best

    return Predictor(name, lambda j: j, predict, prefix_value_bound)


# -- evaders ----------------------------------------------------------------


def evader_from_dominator(
    P: Predictor,
    horizon: int,
    g: Callable[[int, int], int] | None = None,
    budget: int | None = None,
) -> list[int]:
    """Build x by the bounded-prefix recursion x(n) = g(n, 1 + max x below n).

    With a caller-supplied g the recursion is applied as given (the
    caller warrants g(n, k) exceeds the predictor's reach over k-bounded
    prefixes). Without one, exact mode computes that reach itself: from
    the predictor's exact bound hook when available, else by enumerating
    all k^n prefixes while that fits the budget, and evades by one above
    it at every D-point.
    """
    if horizon < 1:
        raise PreconditionError("horizon must be >= 1")
    cap = step_budget(budget)
    dset = set(P.domain_members(horizon))
    values: list[int] = []
    for n in range(horizon):
        k = 1 + (max(values) if values else 0)
        if g is not None:
            values.append(g(n, k))
            continue
        if n not in dset:
            values.append(1)
            continue
        if P.prefix_value_bound is not None:
            reach = P.prefix_value_bound(n, k)
        else:
            if k ** n > cap:
                raise BudgetExceeded(
                    f"enumerating {k}^{n} prefixes exceeds budget {cap}"
                )
            reach = 0
            for t in itertools.product(range(k), repeat=n):
                guess = P.predict(n, t)
                if guess is not None:
                    reach = max(reach, guess)
        values.append(reach + 1)
    return values


def evader_against_family(preds: Sequence[Predictor], horizon: int) -> list[int]:
    """Diagonalize against a finite predictor family.

    x(m) is the least natural different from every active prediction,
    where predictor e is active at m when e <= min(m, family size - 1)
    and m lies in its domain.
    """
    if not preds:
        raise PreconditionError("family must be nonempty")
    if horizon < 1:
        raise PreconditionError("horizon must be >= 1")
    domains = [set(p.domain_members(horizon)) for p in preds]
    values: list[int] = []
    for m in range(horizon):
        forbidden = set()
        for e in range(min(m, len(preds) - 1) + 1):
            if m in domains[e]:
                guess = preds[e].predict(m, tuple(values))
                if guess is not None:
                    forbidden.add(guess)
        x = 0
        while x in forbidden:
            x += 1
        values.append(x)
    return values


# -- traces ------------------------------------------------------------------


def block_interval(n: int) -> tuple[int, int]:
    """The n-th block [n(n-1)/2, n(n+1)/2); its length is n."""
    return (n * (n - 1)) // 2, (n * (n + 1)) // 2


@dataclass(frozen=True)
class Trace:
    """Size-n candidate sets per block over a bounded alphabet."""

    alphabet_bound: int
    blocks: dict[int, frozenset[tuple[int, ...]]]

    def __post_init__(self):
        for n, members in self.blocks.items():
            if n < 1:
                raise MalformedTrace(f"block numbers start at 1, got {n}")
            if len(members) != n:
                raise MalformedTrace(f"block {n} has {len(members)} members, wants {n}")
            for m in members:
                if len(m) != n:
                    raise MalformedTrace(f"block {n} member of length {len(m)}")
                if any(v < 0 or v >= self.alphabet_bound for v in m):
                    raise MalformedTrace(f"block {n} member out of alphabet")

    @property
    def max_block(self) -> int:
        return max(self.blocks) if self.blocks else 0


def first_difference_positions(members: Sequence[tuple[int, ...]]) -> set[int]:
    """Positions where two members first disagree after agreeing below."""
    out: set[int] = set()
    for a, b in itertools.combinations(members, 2):
        for i, (x, y) in enumerate(zip(a, b)):
            if x != y:
                out.add(i)
                break
    return out


def trace_predictor(T: Trace) -> Predictor:
    """Predictor pinned to one safe position inside every block.

    Within block n at most n-1 positions can carry a first difference,
    so some position j is difference-free: any two members agreeing
    below j agree at j. The predictor adds the least such j (in global
    coordinates) to D and answers with the common value of the members
    consistent with the observed block prefix.
    """
    selected: list[int] = []
    rules: dict[int, tuple[int, int, tuple[tuple[int, ...], ...]]] = {}
    for n in sorted(T.blocks):
        members = tuple(sorted(T.blocks[n]))
        diffs = first_difference_positions(members)
        if len(diffs) > n - 1:
            raise MalformedTrace(
                f"block {n}: {len(diffs)} first differences exceed {n - 1}"
            )
        j_local = next(i for i in range(n) if i not in diffs)
        start, _ = block_interval(n)
        j = start + j_local
        selected.append(j)
        rules[j] = (start, j_local, members)

    def predict(n: int, sigma: tuple[int, ...]) -> Optional[int]:
        if n not in rules:
            return None
        start, j_local, members = rules[n]
        observed = sigma[start:start + j_local]
        hits = [m[j_local] for m in members if m[:j_local] == tuple(observed)]
        if not hits:
            return None
        if any(h != hits[0] for h in hits):
            raise MalformedTrace("selected position carries a first difference")
        return hits[0]

    ordered = sorted(selected)
    return Predictor(
        "trace",
        lambda k: ordered[k] if k < len(ordered) else None,
        predict,
    )


def parse_trace_file(path: str) -> Trace:
    """Load a trace from one-block-per-line text: ``n: s1 s2 ... sn`` with
    comma-separated digits per string."""
    blocks: dict[int, frozenset[tuple[int, ...]]] = {}
    bound = 1
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if ":" not in line:
                raise MalformedTrace(f"{path}:{lineno}: missing ':'")
            head, body = line.split(":", 1)
            try:
                n = int(head)
            except ValueError as exc:
                raise MalformedTrace(f"{path}:{lineno}: bad block number") from exc
            members = []
            for chunk in body.split():
                try:
                    members.append(tuple(int(v) for v in chunk.split(",")))
                except ValueError as exc:
                    raise MalformedTrace(f"{path}:{lineno}: bad member {chunk!r}") from exc
            blocks[n] = frozenset(members)
            for m in members:
                bound = max(bound, max(m, default=0) + 1)
    return Trace(bound, blocks)


# -- meager layers ------------------------------------------------------------


@dataclass(frozen=True)
class MeagerLayerReport:
    """Finite-stage membership in the i-th mismatch layer."""

    layer: int
    horizon: int
    mismatch_count: int
    member: bool

    def to_dict(self) -> dict:
        return {"layer": self.layer, "horizon": self.horizon,
                "mismatch_count": self.mismatch_count, "member": self.member}


def meager_layer_Ci(P: Predictor, i: int, x, horizon: int) -> MeagerLayerReport:
    """Is the mismatch count of x below the horizon smaller than i?"""
    if i < 0:
        raise PreconditionError("layer index must be >= 0")
    report = play_game(P, x, horizon)
    count = report.mismatch_count
    return MeagerLayerReport(i, horizon, count, count < i)


# -- CLI grammar ---------------------------------------------------------------


def parse_function(spec: str) -> Callable[[int], int]:
    """Function grammar: n | n2 | pow2 | zero | const:<c> | lin:<a>,<b>."""
    spec = spec.strip()
    if spec == "n":
        return lambda n: n
    if spec == "n2":
        return lambda n: n * n
    if spec == "pow2":
        return lambda n: 2 ** n
    if spec == "zero":
        return lambda n: 0
    if spec.startswith("const:"):
        try:
            c = int(spec.split(":", 1)[1])
        except ValueError as exc:
            raise ParseError(f"bad constant in {spec!r}") from exc
        return lambda n: c
    if spec.startswith("lin:"):
        try:
            a, b = (int(v) for v in spec.split(":", 1)[1].split(","))
        except ValueError as exc:
            raise ParseError(f"bad linear function {spec!r}") from exc
        return lambda n: a * n + b
    raise ParseError(f"unknown function spec {spec!r}")


def parse_predictor(spec: str) -> Predictor:
    """Predictor grammar: zero | lib:<f1,f2,...> | trace:<file>."""
    spec = spec.strip()
    if spec == "zero":
        return zero_predictor()
    if spec.startswith("lib:"):
        names = spec.split(":", 1)[1].split(",")
        # Function specs may themselves contain ':' followed by a comma
        # list (lin:<a>,<b>), so rejoin chunks that are continuations.
        merged: list[str] = []
        for chunk in names:
            if merged and (merged[-1].startswith("lin:") and merged[-1].count(",") < 1
                           or merged[-1].endswith(":")):
                merged[-1] += "," + chunk
            else:
                merged.append(chunk)
        funcs = [parse_function(c) for c in merged]
        return predictor_from_library(funcs, name=spec)
    if spec.startswith("trace:"):
        return trace_predictor(parse_trace_file(spec.split(":", 1)[1]))
    raise ParseError(f"unknown predictor spec {spec!r}")
