import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from era import corpus_path
from era.api import EqualityAnalyzer, check_program
from era.frontend import CoreProgram, SourceProgram

CLEAN = "VAR x: INTEGER;\nBEGIN\n  READ(x);\n  WRITE(x)\nEND.\n"


def test_check_program_accepts_forms():
    path = corpus_path("branch_merge")
    forms = [path, str(path), SourceProgram.read(path), CLEAN]
    progs = check_program(forms)
    assert len(progs) == 4 and all(isinstance(p, CoreProgram) for p in progs)
    assert check_program(progs[0]) == [progs[0]]


@pytest.mark.parametrize("bad, exc", [(42, TypeError), ([1.5], TypeError), ([], ValueError)])
def test_check_program_rejects(bad, exc):
    with pytest.raises(exc):
        check_program(bad)


def test_fit_predict_transform():
    est = EqualityAnalyzer().fit([corpus_path("loop_findings"), CLEAN])
    assert est.n_programs_ == 2
    assert len(est.diagnostics_[0]) == 7 and est.diagnostics_[1] == []
    assert est.predict(corpus_path("loop_findings")) == est.diagnostics_[:1]
    text = est.transform(corpus_path("loop_findings"))[0]
    assert "ERROR" in text


def test_query_facade():
    est = EqualityAnalyzer(depth=2).fit(corpus_path("branch_merge"))
    assert est.query("end", "i") == ["j", "a[1]"]
    assert EqualityAnalyzer().fit(corpus_path("loop_findings")).query("22:3", "x") == ["inaccessible"]


def test_not_fitted():
    with pytest.raises(NotFittedError):
        EqualityAnalyzer().predict(CLEAN)


def test_params_and_clone():
    est = EqualityAnalyzer(interp_level=1, widening=False, cap=9)
    p = est.get_params()
    assert p["interp_level"] == 1 and p["cap"] == 9 and not p["widening"]
    assert clone(est).get_params() == p
    est.set_params(depth=0)
    with pytest.raises(ValueError):
        est.fit(CLEAN)
