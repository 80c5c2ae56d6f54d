import pytest

from critarm import exact_oracle as eo


@pytest.mark.parametrize("name", eo.INEQUALITY_NAMES)
def test_checker_passes_on_random_instances(name):
    for seed in range(60):
        rep = eo.check_inequality(name, seed)
        assert rep.passed, (
            f"{name} violated at {rep.instance}: lhs={rep.lhs!r} "
            f"rhs={rep.rhs!r} margin={rep.margin!r}")


def test_margin_sign_convention():
    rep = eo.check_inequality("griffiths", 0)
    assert rep.margin == pytest.approx(rep.rhs - rep.lhs, abs=1e-15)


def test_unknown_name_rejected():
    with pytest.raises(ValueError):
        eo.check_inequality("nonsense", 0)


def test_reports_are_deterministic():
    a = eo.check_inequality("simon_lieb", 17)
    b = eo.check_inequality("simon_lieb", 17)
    assert (a.lhs, a.rhs, a.margin) == (b.lhs, b.rhs, b.margin)


def test_suite_writes_csv(tmp_path):
    path = tmp_path / "ineq.csv"
    reports = eo.run_inequality_suite(["griffiths", "ding"], n_instances=4,
                                      base_seed=3, csv_path=str(path))
    assert len(reports) == 8
    lines = path.read_text().strip().splitlines()
    assert lines[0] == "name,instance_seed,lhs,rhs,margin,pass"
    assert len(lines) == 9
    assert all(line.endswith(",1") for line in lines[1:])
