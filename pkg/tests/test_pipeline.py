import pytest

from toralspec.errors import InputError, NotInvariantError, NotUnipotentError
from toralspec.measures import empirical_measure, torus_family
from toralspec.pipeline import dpm_pipeline, final_bound
from toralspec.symbolic import SymbolicPoint
from toralspec.torus import Subtorus, TorusPoint
from toralspec.unipotent import SupportDescriptor

EXT = [[1, 0, 0], [1, 2, 1], [0, 1, 1]]
FIBER = Subtorus("0,0;1,0;0,1")
ALPHA = SupportDescriptor.from_text("a = sqrt(2)-1; H = ; m = 1")


def test_final_bound_value():
    assert final_bound(0.25) == pytest.approx(0.25 + 1 - 0.75 ** 2 * (1 / 1.25 - 0.5))


def test_periodic_target_returns_its_orbit():
    x = TorusPoint("1/2,0,1/2")
    res = dpm_pipeline(EXT, FIBER, ALPHA, x, 0.25)
    assert res.period == 1 and res.distance_to_target == 0
    y = TorusPoint("0,1/5,2/5")
    ref = empirical_measure(EXT, y, 10, "torus-3")
    res = dpm_pipeline(EXT, FIBER, ALPHA, y, 0.25, target=ref, family=torus_family(3))
    assert res.distance_to_target == pytest.approx(0, abs=1e-12)


def test_non_invariant_subtorus_fails_at_setup():
    with pytest.raises(NotInvariantError) as info:
        dpm_pipeline(EXT, Subtorus("1,0;0,1;0,0"), ALPHA, SymbolicPoint.parse("sqrt(2)-1, 0, 0"), 0.25)
    assert info.value.stage == "0:setup"


def test_non_unipotent_quotient_rejected():
    A = [[2, 1, 0], [1, 1, 0], [0, 0, 1]]
    with pytest.raises((NotUnipotentError, NotInvariantError, InputError)):
        dpm_pipeline(A, Subtorus("0;0;1"), ALPHA, SymbolicPoint.parse("sqrt(2)-1, 0, 0"), 0.25)


def test_bad_eps():
    with pytest.raises(InputError):
        dpm_pipeline(EXT, FIBER, ALPHA, SymbolicPoint.parse("sqrt(2)-1, 0, 0"), 1.5)
