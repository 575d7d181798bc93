import numpy as np
import pytest

from spectral_umap.knn_graph import KnnGraph, n_components

_criteria = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(id, text): acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        cid, text = marker.args
        if hasattr(item, "callspec"):
            text = f"{text} [{item.callspec.id}]"
        status = {"passed": "PASS", "failed": "FAIL", "skipped": "SKIP"}[report.outcome]
        _criteria[item.nodeid] = (cid, status, text)


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for cid, status, text in sorted(_criteria.values(), key=lambda r: (float(r[0]), r[2])):
        terminalreporter.write_line(f"criterion {cid:>4}: {status}  {text}")


def random_graph(rng, n, p=0.3, connected=False):
    """Random weighted graph as an undirected KnnGraph (u < v)."""
    while True:
        iu, iv = np.triu_indices(n, 1)
        keep = rng.random(iu.size) < p
        u, v = iu[keep], iv[keep]
        w = rng.uniform(0.1, 2.0, u.size)
        g = KnnGraph(n, u, v, w)
        if not connected or n_components(g) == 1:
            return g


def dense_laplacian(graph):
    """Laplacian built entry by entry from the edge list."""
    L = np.zeros((graph.n_vertices, graph.n_vertices))
    for u, v, w in zip(graph.src, graph.dst, graph.weights):
        L[u, v] -= w
        L[v, u] -= w
        L[u, u] += w
        L[v, v] += w
    return L


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def path_graph(n, w=1.0):
    return KnnGraph(n, np.arange(n - 1), np.arange(1, n), np.full(n - 1, w))
