"""Synthetic labeled transaction data and Erdos-Renyi benchmark graphs.

Roles in the synthetic ledger (all but ``phisher`` are labeled normal):

ordinary
    Background accounts. They send log-normal amounts to each other at
    uniform times over the horizon and occasionally trade with hubs.
hub
    Exchanges: high-degree nodes touched by a large share of accounts.
phisher
    Large early funding from its group's exchange plus a smaller prefund,
    then dust from many distinct victims inside a short late window, then
    large cash-out transfers to the group's collectors right after.
lookalike
    Same profile as a phisher but cashing out into its own group's sinks, so
    per-address statistics cannot tell the two apart.
amount_decoy
    Funded like a phishing group and paying that group's collectors large
    sums, but early; its late activity is dust plus one moderate payment
    elsewhere. Amount-only walks confuse it with phishers.
time_decoy
    Dust burst and late dust payments into a phishing group's collectors,
    while its money arrives from an exchange mid-horizon. Time-only walks
    confuse it with phishers.
collector / sink
    Cash-out targets of phishing (lookalike) groups; they forward a little
    to an exchange at the very end.

Only the blend of amount and time identifies the phishers' defining edge,
the cash-out, which is both large and late. Uniform walks are confused by
both decoy kinds.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, fields
from importlib import resources

import numpy as np

from txembed.txgraph import LabelSet, TxGraph, TxRecord

DEFAULTS_FILE = "synth_defaults.json"
FUNDING_SOURCES = ("hub", "group", "ordinary")


@dataclass(frozen=True)
class SynthParams:
    version: int = 2
    horizon: int = 10_000_000
    start_time: int = 1_500_000_000
    n_hubs: int = 10
    # role mix, as fractions of the non-hub normal accounts
    lookalike_fraction: float = 0.55
    amount_decoy_fraction: float = 0.12
    time_decoy_fraction: float = 0.12
    accounts_per_group: int = 50
    collectors_per_group: int = 3
    # background
    bg_out_degree: float = 3.0
    bg_amount_mu: float = 0.0
    bg_amount_sigma: float = 1.0
    hub_trades: float = 1.0
    hub_amount_mu: float = 3.0
    hub_amount_sigma: float = 1.0
    # scam profile
    funding_source: str = "group"
    funding_amount_mu: float = 3.0
    funding_amount_sigma: float = 0.3
    funding_window: float = 0.01
    funding_passthrough: float = 0.35
    prefund_amount_mu: float | None = 1.5
    victims_min: int = 10
    victims_max: int = 30
    victim_amount_mu: float = -8.0
    victim_amount_sigma: float = 0.5
    burst_start_min: float = 0.70
    burst_start_max: float = 0.90
    burst_length: float = 0.03
    cashout_min: int = 3
    cashout_max: int = 3
    cashout_delay: float = 0.02
    cashout_concentration: float = 1.0
    # decoys
    decoy_amount_mu: float = 1.2
    decoy_amount_sigma: float = 0.3
    decoy_spend_mu: float = 0.0
    forward_amount_mu: float = 0.0
    forward_amount_sigma: float = 0.5

    def __post_init__(self):
        if self.funding_source not in FUNDING_SOURCES:
            raise ValueError(f"funding_source must be one of {FUNDING_SOURCES}")
        if self.accounts_per_group < 1 or self.collectors_per_group < 1:
            raise ValueError("accounts_per_group and collectors_per_group must be >= 1")
        if not (1 <= self.cashout_min <= self.cashout_max):
            raise ValueError("need 1 <= cashout_min <= cashout_max")
        if not (1 <= self.victims_min <= self.victims_max):
            raise ValueError("need 1 <= victims_min <= victims_max")

    @classmethod
    def defaults(cls) -> "SynthParams":
        text = resources.files("txembed.data").joinpath(DEFAULTS_FILE).read_text()
        return cls.from_dict(json.loads(text))

    @classmethod
    def from_dict(cls, d: dict) -> "SynthParams":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown synthetic parameter(s): {sorted(unknown)}")
        return cls(**d)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class SynthData:
    records: list[TxRecord]
    labels: LabelSet
    roles: dict[str, str]


def _addresses(rng: np.random.Generator, n: int) -> list[str]:
    seen: set[str] = set()
    out = []
    while len(out) < n:
        a = "0x" + rng.bytes(20).hex()
        if a not in seen:
            seen.add(a)
            out.append(a)
    return out


def generate(n_normal: int, n_phish: int, seed: int = 0,
             params: SynthParams | None = None) -> SynthData:
    p = params or SynthParams.defaults()
    if n_normal < 1 or n_phish < 0:
        raise ValueError("need n_normal >= 1 and n_phish >= 0")
    rng = np.random.default_rng(int(seed) & 0xFFFFFFFFFFFFFFFF)
    H = p.horizon

    n_hubs = min(p.n_hubs, max(1, n_normal // 20))
    rest = n_normal - n_hubs
    fractions = (p.lookalike_fraction, p.amount_decoy_fraction, p.time_decoy_fraction)
    n_look, n_adec, n_tdec = (int(round(f * rest)) if n_phish > 0 else 0 for f in fractions)
    n_pgroups = -(-n_phish // p.accounts_per_group)
    n_lgroups = -(-n_look // p.accounts_per_group)
    cpg = p.collectors_per_group
    n_coll = n_pgroups * cpg
    n_sink = n_lgroups * cpg
    n_ord = rest - n_look - n_coll - n_sink - n_adec - n_tdec
    if n_ord < p.victims_max + 1:
        raise ValueError("too few ordinary accounts for the victim profile; raise n_normal")

    addr = _addresses(rng, n_normal + n_phish)
    roles: dict[str, str] = {}
    pos = 0

    def take(k, role):
        nonlocal pos
        chunk = addr[pos:pos + k]
        pos += k
        for a in chunk:
            roles[a] = role
        return chunk

    hubs = take(n_hubs, "hub")
    ordinary = take(n_ord, "ordinary")
    lookalikes = take(n_look, "lookalike")
    collectors = take(n_coll, "collector")
    sinks = take(n_sink, "sink")
    amount_decoys = take(n_adec, "amount_decoy")
    time_decoys = take(n_tdec, "time_decoy")
    phishers = take(n_phish, "phisher")

    src: list[str] = []
    dst: list[str] = []
    amt: list[float] = []
    ts: list[int] = []

    def tx(a, b, amount, t):
        src.append(a)
        dst.append(b)
        amt.append(float(amount))
        ts.append(int(p.start_time + min(max(t, 0), H)))

    def early():
        return rng.integers(int(p.funding_window * H) + 1)

    def burst(account):
        # dust from distinct victims inside a short late window; returns (total, end)
        start = rng.uniform(p.burst_start_min, p.burst_start_max) * H
        end = start + p.burst_length * H
        n_vic = int(rng.integers(p.victims_min, p.victims_max + 1))
        total = 0.0
        for v in rng.choice(n_ord, size=n_vic, replace=False):
            x = rng.lognormal(p.victim_amount_mu, p.victim_amount_sigma)
            total += x
            tx(ordinary[v], account, x, rng.uniform(start, end))
        return total, end

    # background among ordinary accounts
    for a in ordinary:
        for _ in range(rng.poisson(p.bg_out_degree)):
            b = ordinary[rng.integers(n_ord)]
            if b != a:
                tx(a, b, rng.lognormal(p.bg_amount_mu, p.bg_amount_sigma), rng.integers(H))
        for _ in range(rng.poisson(p.hub_trades)):
            h = hubs[rng.integers(n_hubs)]
            amount = rng.lognormal(p.hub_amount_mu, p.hub_amount_sigma)
            if rng.random() < 0.5:
                tx(a, h, amount, rng.integers(H))
            else:
                tx(h, a, amount, rng.integers(H))

    group_hub = [hubs[i] for i in rng.integers(n_hubs, size=n_pgroups + n_lgroups)]

    def fund(account, group):
        # large early funding, plus an optional smaller prefund from a random account
        if p.funding_source == "group":
            src_ = group_hub[group]
        elif p.funding_source == "ordinary":
            src_ = ordinary[rng.integers(n_ord)]
        else:
            src_ = hubs[rng.integers(n_hubs)]
        funding = rng.lognormal(p.funding_amount_mu, p.funding_amount_sigma)
        tx(src_, account, funding, early())
        if p.prefund_amount_mu is not None:
            tx(ordinary[rng.integers(n_ord)], account,
               rng.lognormal(p.prefund_amount_mu, p.funding_amount_sigma), early())
        return funding

    def scam_profile(account, group, targets):
        funding = fund(account, group)
        dust, end = burst(account)
        total = p.funding_passthrough * funding + dust
        k = int(rng.integers(p.cashout_min, p.cashout_max + 1))
        dests = rng.choice(len(targets), size=min(k, len(targets)), replace=False)
        share = rng.dirichlet(np.full(len(dests), p.cashout_concentration))
        for d, s in zip(dests, share):
            tx(account, targets[d], total * s + 1e-9,
               rng.uniform(end, end + p.cashout_delay * H))

    for k, a in enumerate(phishers):
        g = k // p.accounts_per_group
        scam_profile(a, g, collectors[g * cpg:(g + 1) * cpg])
    for k, a in enumerate(lookalikes):
        g = k // p.accounts_per_group
        scam_profile(a, n_pgroups + g, sinks[g * cpg:(g + 1) * cpg])
    for a in amount_decoys:
        # funded like a phishing group, pays its collectors large sums early,
        # then a dust burst and one moderate late payment elsewhere
        g = int(rng.integers(n_pgroups))
        fund(a, g)
        for c in collectors[g * cpg:(g + 1) * cpg]:
            tx(a, c, rng.lognormal(p.decoy_amount_mu, p.decoy_amount_sigma), early())
        _, end = burst(a)
        tx(a, ordinary[rng.integers(n_ord)], rng.lognormal(p.decoy_spend_mu, p.decoy_amount_sigma),
           rng.uniform(end, end + p.cashout_delay * H))
    for a in time_decoys:
        # bulk money from an exchange mid-horizon, then a dust burst and dust
        # payments into a phishing group's collectors
        g = int(rng.integers(n_pgroups))
        tx(hubs[rng.integers(n_hubs)], a, rng.lognormal(p.funding_amount_mu, p.funding_amount_sigma),
           rng.uniform(0.3, 0.6) * H)
        _, end = burst(a)
        for c in collectors[g * cpg:(g + 1) * cpg]:
            tx(a, c, rng.lognormal(p.victim_amount_mu, p.victim_amount_sigma),
               rng.uniform(end, end + p.cashout_delay * H))
    for c in collectors + sinks:
        tx(c, hubs[rng.integers(n_hubs)],
           rng.lognormal(p.forward_amount_mu, p.forward_amount_sigma),
           rng.uniform(0.95, 1.0) * H)

    records = [TxRecord(a, b, x, t) for a, b, x, t in zip(src, dst, amt, ts)]
    return SynthData(records, LabelSet(frozenset(phishers)), roles)


def gen_synthetic_tx(n_normal: int = 2000, n_phish: int = 50, seed: int = 0,
                     params: SynthParams | None = None) -> tuple[list[TxRecord], LabelSet]:
    data = generate(n_normal, n_phish, seed, params)
    return data.records, data.labels


def gen_er_graph(n: int, avg_degree: float, seed: int = 0, direction: str = "undirected") -> TxGraph:
    """G(n, p) with ``p = avg_degree / (n - 1)``; every edge has amount 1 and timestamp 1."""
    if n < 2:
        raise ValueError("need n >= 2")
    prob = min(1.0, avg_degree / (n - 1))
    rng = np.random.default_rng(int(seed) & 0xFFFFFFFFFFFFFFFF)
    n_pairs = n * (n - 1) // 2
    m = int(rng.binomial(n_pairs, prob))
    if m == n_pairs:
        lin = np.arange(n_pairs, dtype=np.int64)
    else:
        lin = np.sort(rng.choice(n_pairs, size=m, replace=False).astype(np.int64))
    # linear index over the strict upper triangle, row-major
    i = (n - 2 - np.floor(np.sqrt(-8.0 * lin + 4.0 * n * (n - 1) - 7) / 2.0 - 0.5)).astype(np.int64)
    i = np.clip(i, 0, n - 2)

    def row_start(r):
        return r * (2 * n - r - 1) // 2

    i -= (row_start(i) > lin).astype(np.int64)
    i += (row_start(i + 1) <= lin).astype(np.int64)
    j = lin - row_start(i) + i + 1
    width = len(str(n - 1))
    nodes = [f"v{k:0{width}d}" for k in range(n)]
    ones = np.ones(m)
    return TxGraph.from_edges(nodes, i, j, ones, ones.astype(np.int64), direction)
