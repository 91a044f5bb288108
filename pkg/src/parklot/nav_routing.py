"""Navigation graph over the lot and Dijkstra routing to the nearest vacancy."""

import heapq
import math
from dataclasses import dataclass, field

from parklot.depth_model import PlanarPoint, euclidean_distance
from parklot.errors import NoEntrances, NoVacantSpot, UnknownNode, Unreachable
from parklot.vacancy import VACANT

ENTRANCE = "entrance"
WAYPOINT = "waypoint"
SPOT = "spot"

DEFAULT_LANE_OFFSET = 3.0
# Entrances placed exactly on a lane end still need a positive edge.
MIN_EDGE = 1e-9


@dataclass(frozen=True)
class NavNode:
    node_id: int
    kind: str
    position: PlanarPoint
    spot_ref: int = None


@dataclass(frozen=True)
class NavEdge:
    u: int
    v: int
    weight: float


@dataclass
class NavGraph:
    nodes: list = field(default_factory=list)
    edges: list = field(default_factory=list)

    def __post_init__(self):
        self._adj = {}
        for n in self.nodes:
            self._adj.setdefault(n.node_id, [])
        for e in self.edges:
            self._check_edge(e)
            self._adj[e.u].append((e.v, e.weight))
            self._adj[e.v].append((e.u, e.weight))

    def _check_edge(self, e):
        if not e.weight > 0:
            raise ValueError(f"edge ({e.u}, {e.v}) has non-positive weight {e.weight}")
        for n in (e.u, e.v):
            if n not in self._adj:
                raise UnknownNode(f"edge references unknown node {n}")

    def add_node(self, kind, position, spot_ref=None):
        node = NavNode(len(self.nodes), kind, position, spot_ref)
        self.nodes.append(node)
        self._adj[node.node_id] = []
        return node.node_id

    def add_edge(self, u, v, weight=None):
        if weight is None:
            weight = euclidean_distance(self.nodes[u].position, self.nodes[v].position)
        e = NavEdge(u, v, weight)
        self._check_edge(e)
        self.edges.append(e)
        self._adj[u].append((v, weight))
        self._adj[v].append((u, weight))

    def neighbors(self, n):
        return self._adj[n]

    def __contains__(self, n):
        return n in self._adj

    def of_kind(self, kind):
        return [n for n in self.nodes if n.kind == kind]


@dataclass(frozen=True)
class Route:
    node_sequence: tuple
    total_distance: float
    target_spot: int


def _nearest(graph, candidates, point):
    return min(candidates, key=lambda n: (euclidean_distance(graph.nodes[n].position, point), n))


def build_nav_graph(lot, vmap, entrances, lane_offset=DEFAULT_LANE_OFFSET, link_rows=True):
    """Lay a lane under each row and hang spot and entrance nodes off it.

    Each row's lane runs ``lane_offset`` below its band with one waypoint per
    inter-pillar gap midline. With ``link_rows`` the left ends of consecutive
    lanes are joined; without it rows form separate components.
    """
    entrances = list(entrances)
    if not entrances:
        raise NoEntrances("at least one entrance is required")
    g = NavGraph()
    for p in entrances:
        g.add_node(ENTRANCE, PlanarPoint(*p))

    lanes = []
    for row in lot.rows:
        lane_y = row.band.y_lo - lane_offset
        ids = []
        for prev, nxt in zip(row.pillars, row.pillars[1:]):
            mid = (prev.footprint.x_hi + nxt.footprint.x_lo) / 2
            ids.append(g.add_node(WAYPOINT, PlanarPoint(mid, lane_y)))
        for a, b in zip(ids, ids[1:]):
            if g.nodes[a].position != g.nodes[b].position:
                g.add_edge(a, b)
        lanes.append(ids)

    for spot in vmap.spots:
        lane = lanes[spot.row_index] if spot.row_index < len(lanes) else []
        pos = PlanarPoint(spot.center_x, lot.rows[spot.row_index].band.center)
        node = g.add_node(SPOT, pos, spot.spot_id)
        if lane:
            g.add_edge(node, _nearest(g, lane, pos))

    if link_rows:
        heads = [lane[0] for lane in lanes if lane]
        for a, b in zip(heads, heads[1:]):
            g.add_edge(a, b)

    endpoints = sorted({n for lane in lanes if lane for n in (lane[0], lane[-1])})
    if endpoints:
        for e in range(len(entrances)):
            near = _nearest(g, endpoints, g.nodes[e].position)
            d = euclidean_distance(g.nodes[e].position, g.nodes[near].position)
            g.add_edge(e, near, max(d, MIN_EDGE))
    return g


def dijkstra(graph, source):
    """Shortest distances and predecessors from ``source``.

    Unreachable nodes get ``math.inf``. Among equal-length paths the
    predecessor with the smaller node id is kept.
    """
    if source not in graph:
        raise UnknownNode(f"unknown source node {source}")
    dist = {n.node_id: math.inf for n in graph.nodes}
    pred = {n.node_id: None for n in graph.nodes}
    dist[source] = 0.0
    done = set()
    heap = [(0.0, source)]
    while heap:
        d, u = heapq.heappop(heap)
        if u in done:
            continue
        done.add(u)
        for v, w in graph.neighbors(u):
            if v in done:
                continue
            nd = d + w
            if nd < dist[v]:
                dist[v] = nd
                pred[v] = u
                heapq.heappush(heap, (nd, v))
            elif nd == dist[v] and u < pred[v]:
                pred[v] = u
    return dist, pred


def path_to(pred, source, target):
    path = [target]
    while path[-1] != source:
        prev = pred[path[-1]]
        if prev is None:
            raise Unreachable(f"node {target} is not reachable from {source}")
        path.append(prev)
    return tuple(reversed(path))


def nearest_vacant(graph, vmap, entrance):
    if entrance not in graph:
        raise UnknownNode(f"unknown entrance node {entrance}")
    if graph.nodes[entrance].kind != ENTRANCE:
        raise UnknownNode(f"node {entrance} is a {graph.nodes[entrance].kind}, not an entrance")
    vacant = {s.spot_id for s in vmap.spots if s.status == VACANT}
    if not vacant:
        raise NoVacantSpot("every spot is occupied")
    dist, pred = dijkstra(graph, entrance)
    candidates = [
        (dist[n.node_id], n.spot_ref, n.node_id)
        for n in graph.of_kind(SPOT)
        if n.spot_ref in vacant and dist[n.node_id] < math.inf
    ]
    if not candidates:
        raise Unreachable(f"no vacant spot is reachable from entrance {entrance}")
    d, spot_id, node = min(candidates)
    return Route(path_to(pred, entrance, node), d, spot_id)
