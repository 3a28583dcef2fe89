"""Hypothesis strategies shared by the test modules."""

from hypothesis import strategies as st

from stablecube.generators import random_graph, random_tree, random_wallspace

seeds = st.integers(min_value=0, max_value=2**32 - 1)


@st.composite
def trees(draw, min_n=2, max_n=30):
    n = draw(st.integers(min_n, max_n))
    return random_tree(n, draw(seeds))


@st.composite
def small_graphs(draw, min_n=4, max_n=12):
    n = draw(st.integers(min_n, max_n))
    return random_graph(n, draw(st.integers(0, 3)), 4, draw(seeds))


@st.composite
def wallspaces(draw, max_walls=10, n_points=8):
    return random_wallspace(n_points, draw(st.integers(1, max_walls)), draw(seeds))


@st.composite
def vertex_subsets(draw, g, min_size=1, max_size=4):
    k = draw(st.integers(min_size, min(max_size, g.n)))
    idx = draw(st.lists(st.integers(0, g.n - 1), min_size=k, max_size=k, unique=True))
    return [g.vertices[i] for i in idx]


def spider(arms):
    """Arms of the given lengths glued at a centre (-1, 0); arm a ends at (a, length)."""
    from stablecube.geomgraph import MetricGraph

    centre = (-1, 0)
    verts = [centre] + [(a, i) for a, n in enumerate(arms) for i in range(1, n + 1)]
    edges = [(centre, (a, 1)) for a in range(len(arms))]
    edges += [((a, i), (a, i + 1)) for a, n in enumerate(arms) for i in range(1, n)]
    return MetricGraph(verts, edges)


@st.composite
def spiders(draw, min_arm=20, max_arm=60):
    return spider(draw(st.lists(st.integers(min_arm, max_arm), min_size=2, max_size=4)))
