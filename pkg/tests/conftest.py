import pytest

from bilingual_ae import synth
from bilingual_ae.corpus import BagOfWords, build_vocabulary, make_pairs, tokenize


def random_bag(rng, V, max_words=5):
    k = int(rng.integers(1, max_words + 1))
    return BagOfWords(rng.integers(0, V, size=2 * k))


@pytest.fixture(autouse=True)
def _scratch_cwd(tmp_path, monkeypatch):
    # commands that only print still drop a manifest in the working directory
    monkeypatch.chdir(tmp_path)


@pytest.fixture(scope="session")
def synth_corpus():
    """Default synthetic corpus (50 words, 4 classes, 2000 pairs, 10% noise, seed 1)."""
    return synth.generate()


@pytest.fixture(scope="session")
def synth_pairs(synth_corpus):
    tx = [tokenize(s) for s in synth_corpus.sents_x]
    ty = [tokenize(s) for s in synth_corpus.sents_y]
    vx, vy = build_vocabulary(tx), build_vocabulary(ty)
    pairs, _ = make_pairs(tx, ty, vx, vy)
    return pairs, vx, vy


def labeled(docs):
    return [(lab, tokenize(text)) for lab, text in docs]


# --- acceptance reporting: one PASS/FAIL line per criterion -----------------

_ACCEPTANCE = {}


class Criterion:
    def __init__(self, number, title):
        self.number, self.title = number, title
        self.checks = []

    def check(self, ok, detail):
        """Record one measured condition; the caller asserts afterwards."""
        self.checks.append((bool(ok), detail))
        return bool(ok)

    def line(self, outcome):
        ok = outcome == "passed" and bool(self.checks) and all(c for c, _ in self.checks)
        details = "; ".join(d for _, d in self.checks) or f"test {outcome} before any check"
        return f"AC-{self.number:02d} {'PASS' if ok else 'FAIL'}  {self.title}: {details}"


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    if rep.when == "call" or (rep.when == "setup" and rep.failed):
        item._outcome = rep.outcome


@pytest.fixture
def criterion(request):
    marker = request.node.get_closest_marker("criterion")
    c = Criterion(*marker.args)
    yield c
    line = c.line(getattr(request.node, "_outcome", "failed"))
    _ACCEPTANCE[c.number] = line
    print("\n" + line)


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.write_sep("=", "acceptance criteria")
        for n in sorted(_ACCEPTANCE):
            terminalreporter.write_line(_ACCEPTANCE[n])
