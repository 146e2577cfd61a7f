"""Network graph: switches, attached servers, candidate paths and the shared-link matrix.

Node ordering matters here. Every tie among equal-length paths is broken by
comparing node sequences position by position using each node's rank in
``Topology.nodes`` (switches first, in the order given, then servers). This
makes the single "shortest path" per pair deterministic.
"""

from __future__ import annotations

import itertools
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Iterator

DEFAULT_K_PATHS = 4


class TopologyError(ValueError):
    """Raised for malformed topologies or bad arguments."""


class NoPathError(TopologyError):
    pass


@dataclass(frozen=True)
class Link:
    a: str
    b: str
    bandwidth: float  # Gbps
    latency: float  # ms

    def key(self) -> frozenset:
        return frozenset((self.a, self.b))


@dataclass(frozen=True)
class Path:
    nodes: tuple[str, ...]
    latency: float = 0.0

    @property
    def links(self) -> tuple[tuple[str, str], ...]:
        """Directed links in traversal order."""
        return tuple(zip(self.nodes, self.nodes[1:]))

    @property
    def hops(self) -> int:
        return max(len(self.nodes) - 1, 0)

    def __len__(self) -> int:
        return self.hops


EMPTY_PATH = Path(())


@dataclass(frozen=True)
class Topology:
    switches: tuple[str, ...]
    attachments: tuple[tuple[str, str], ...]  # (server, switch)
    links: tuple[Link, ...]
    _cache: dict = field(default_factory=dict, init=False, compare=False, repr=False, hash=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "switches", tuple(self.switches))
        object.__setattr__(self, "attachments", tuple(tuple(a) for a in self.attachments))
        object.__setattr__(self, "links", tuple(self.links))
        nodes = list(self.switches) + [s for s, _ in self.attachments]
        if len(set(nodes)) != len(nodes):
            raise TopologyError("duplicate node ids")
        known = set(nodes)
        adj: dict[str, dict[str, Link]] = {n: {} for n in nodes}
        for link in self.links:
            if link.a not in known or link.b not in known:
                raise TopologyError(f"link {link.a}-{link.b} references an unknown node")
            if link.a == link.b:
                raise TopologyError(f"self-loop at {link.a}")
            if link.bandwidth <= 0:
                raise TopologyError(f"link {link.a}-{link.b}: bandwidth must be > 0")
            if link.latency < 0:
                raise TopologyError(f"link {link.a}-{link.b}: latency must be >= 0")
            if link.b in adj[link.a]:
                raise TopologyError(f"parallel link {link.a}-{link.b}")
            adj[link.a][link.b] = link
            adj[link.b][link.a] = link
        for server, switch in self.attachments:
            if switch not in self.switches:
                raise TopologyError(f"server {server} attached to unknown switch {switch}")
            if set(adj[server]) != {switch}:
                raise TopologyError(f"server {server} must have exactly one link, to {switch}")
        if nodes:
            seen = {nodes[0]}
            queue = deque([nodes[0]])
            while queue:
                for nb in adj[queue.popleft()]:
                    if nb not in seen:
                        seen.add(nb)
                        queue.append(nb)
            if len(seen) != len(nodes):
                raise TopologyError("topology is not connected")
        rank = {n: i for i, n in enumerate(nodes)}
        # neighbours sorted by rank so DFS emits lexicographic order
        nbrs = {n: tuple(sorted(adj[n], key=rank.__getitem__)) for n in nodes}
        self._cache.update(nodes=tuple(nodes), rank=rank, adj=adj, nbrs=nbrs)

    @property
    def nodes(self) -> tuple[str, ...]:
        return self._cache["nodes"]

    @property
    def servers(self) -> tuple[str, ...]:
        return tuple(s for s, _ in self.attachments)

    def rank(self, node: str) -> int:
        return self._cache["rank"][node]

    def switch_of(self, server: str) -> str:
        return dict(self.attachments)[server]

    def is_switch(self, node: str) -> bool:
        return node in self._cache["rank"] and self._cache["rank"][node] < len(self.switches)

    def neighbors(self, node: str) -> tuple[str, ...]:
        return self._cache["nbrs"][node]

    def link(self, a: str, b: str) -> Link:
        return self._cache["adj"][a][b]

    def has_link(self, a: str, b: str) -> bool:
        return b in self._cache["adj"].get(a, {})

    def directed_links(self) -> list[tuple[str, str]]:
        out = []
        for link in self.links:
            out.append((link.a, link.b))
            out.append((link.b, link.a))
        return out

    def make_path(self, nodes: Iterable[str]) -> Path:
        nodes = tuple(nodes)
        if len(nodes) <= 1:
            return EMPTY_PATH
        latency = 0.0
        for a, b in zip(nodes, nodes[1:]):
            if not self.has_link(a, b):
                raise TopologyError(f"{a} and {b} are not adjacent")
            latency += self.link(a, b).latency
        return Path(nodes, latency)

    def _check(self, *nodes: str) -> None:
        for n in nodes:
            if n not in self._cache["rank"]:
                raise TopologyError(f"unknown node {n!r}")

    def bfs_distances(self, src: str) -> dict[str, int]:
        dist = {src: 0}
        queue = deque([src])
        while queue:
            u = queue.popleft()
            for v in self.neighbors(u):
                if v not in dist:
                    dist[v] = dist[u] + 1
                    queue.append(v)
        return dist


def line_topology(switches: list[str], bw: float = 10.0, latency: float = 1.0,
                  attachments: Iterable[tuple[str, str]] = ()) -> Topology:
    """Chain of switches, handy for small hand-checked fixtures."""
    attachments = tuple(attachments)
    links = [Link(a, b, bw, latency) for a, b in zip(switches, switches[1:])]
    links += [Link(srv, sw, bw, latency) for srv, sw in attachments]
    return Topology(tuple(switches), attachments, tuple(links))


def build_leaf_spine(n_spine: int, n_leaf: int, n_servers: int,
                     link_bw: float = 10.0, link_latency: float = 1.0) -> Topology:
    """Two-tier fabric: every leaf wired to every spine, servers round-robin on leaves."""
    for name, val in (("n_spine", n_spine), ("n_leaf", n_leaf), ("n_servers", n_servers)):
        if int(val) != val or val < 1:
            raise TopologyError(f"{name} must be a positive integer, got {val!r}")
    width = max(2, len(str(max(n_spine, n_leaf, n_servers) - 1)))
    spines = [f"spine{i:0{width}d}" for i in range(n_spine)]
    leaves = [f"leaf{i:0{width}d}" for i in range(n_leaf)]
    servers = [f"srv{i:0{width}d}" for i in range(n_servers)]
    links = [Link(leaf, spine, link_bw, link_latency) for spine in spines for leaf in leaves]
    attachments = tuple((srv, leaves[i % n_leaf]) for i, srv in enumerate(servers))
    links += [Link(srv, leaf, link_bw, link_latency) for srv, leaf in attachments]
    return Topology(tuple(spines + leaves), attachments, tuple(links))


def _simple_paths_of_length(topo: Topology, src: str, dst: str, length: int) -> Iterator[tuple[str, ...]]:
    """Loop-free src->dst paths with exactly ``length`` hops, in lexicographic rank order."""
    path = [src]
    on_path = {src}

    def reachable_within(node: str, budget: int) -> bool:
        # BFS avoiding nodes already on the path; prunes dead branches early.
        if node == dst:
            return budget == 0
        dist = {node: 0}
        queue = deque([node])
        while queue:
            u = queue.popleft()
            if dist[u] >= budget:
                continue
            for v in topo.neighbors(u):
                if v == dst:
                    return True
                if v not in dist and v not in on_path:
                    dist[v] = dist[u] + 1
                    queue.append(v)
        return False

    def rec(node: str, remaining: int) -> Iterator[tuple[str, ...]]:
        if remaining == 0:
            if node == dst:
                yield tuple(path)
            return
        for nb in topo.neighbors(node):
            if nb in on_path:
                continue
            if nb == dst and remaining != 1:
                continue
            if nb != dst and not reachable_within(nb, remaining - 1):
                continue
            path.append(nb)
            on_path.add(nb)
            yield from rec(nb, remaining - 1)
            path.pop()
            on_path.discard(nb)

    yield from rec(src, length)


def candidate_paths(topo: Topology, src: str, dst: str, k: int = DEFAULT_K_PATHS) -> list[Path]:
    """Up to ``k`` loop-free paths ordered by (hops, lexicographic node sequence)."""
    if k < 1:
        raise TopologyError("k must be >= 1")
    topo._check(src, dst)
    cache = topo._cache.setdefault("cand", {})
    hit = cache.get((src, dst))
    if hit is not None and (len(hit[0]) >= k or hit[1]):
        return hit[0][:k]
    if src == dst:
        cache[(src, dst)] = ([EMPTY_PATH], True)
        return [EMPTY_PATH]
    dist = topo.bfs_distances(src)
    if dst not in dist:
        raise NoPathError(f"no path between {src} and {dst}")
    found: list[Path] = []
    exhausted = True
    for length in range(dist[dst], len(topo.nodes)):
        for nodes in _simple_paths_of_length(topo, src, dst, length):
            found.append(topo.make_path(nodes))
            if len(found) == k:
                break
        if len(found) == k:
            exhausted = False
            break
    cache[(src, dst)] = (found, exhausted)
    return found


def shortest_path(topo: Topology, src: str, dst: str) -> Path:
    return candidate_paths(topo, src, dst, 1)[0]


def pair_path(topo: Topology, x: str, y: str) -> Path:
    """The one deterministic path used for migration traffic between servers x and y.

    Both orientations share the path computed from the lower-ranked endpoint, so the
    link set of an unordered server pair is well defined.
    """
    if topo.rank(x) <= topo.rank(y):
        return shortest_path(topo, x, y)
    p = shortest_path(topo, y, x)
    return Path(tuple(reversed(p.nodes)), p.latency)


def undirected_links(path: Path) -> frozenset[frozenset]:
    return frozenset(frozenset(l) for l in path.links)


class SharedLinkMatrix:
    """K[x][y][z][w] = 1 when the migration paths of two distinct server pairs share a link.

    Stored sparsely over unordered pairs; indexing accepts ordered pairs.
    """

    def __init__(self, servers: Iterable[str], conflicts: dict[frozenset, frozenset]):
        self.servers = tuple(servers)
        self._conflicts = conflicts

    def __call__(self, x: str, y: str, z: str, w: str) -> int:
        if x == y or z == w:
            return 0
        return int(frozenset((z, w)) in self._conflicts.get(frozenset((x, y)), ()))

    def __getitem__(self, key: tuple[str, str, str, str]) -> int:
        return self(*key)

    def sharing(self, x: str, y: str) -> frozenset:
        """Unordered pairs (other than {x, y}) whose paths share a link with {x, y}."""
        return self._conflicts.get(frozenset((x, y)), frozenset())

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, SharedLinkMatrix):
            return NotImplemented
        return self.servers == other.servers and self._conflicts == other._conflicts


def compute_k_matrix(topo: Topology) -> SharedLinkMatrix:
    hit = topo._cache.get("kmatrix")
    if hit is not None:
        return hit
    pairs = [frozenset(p) for p in itertools.combinations(topo.servers, 2)]
    link_sets = {p: undirected_links(pair_path(topo, *sorted(p, key=topo.rank))) for p in pairs}
    by_link: dict[frozenset, list[frozenset]] = {}
    for p, links in link_sets.items():
        for l in links:
            by_link.setdefault(l, []).append(p)
    conflicts: dict[frozenset, set] = {p: set() for p in pairs}
    for members in by_link.values():
        for p in members:
            conflicts[p].update(members)
    for p in pairs:
        conflicts[p].discard(p)
    km = SharedLinkMatrix(topo.servers, {p: frozenset(c) for p, c in conflicts.items()})
    topo._cache["kmatrix"] = km
    return km
