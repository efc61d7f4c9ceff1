import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from agplan.errors import ContractError
from agplan.estimator import AirGroundPlanner
from agplan.harness import BUNDLED
from agplan.terrain import TerrainSpec, synthesize_terrain, write_dem
from agplan.validation import check_index, check_pairs, check_terrain


def test_fit_predict_matches_plan():
    sc = BUNDLED["ridge"]
    est = AirGroundPlanner(overrides=dict(sc.overrides)).fit(sc.terrain)
    (path,) = est.predict([(sc.start, sc.goal)])
    assert len(path.switch_points) == 2
    assert est.score([(sc.start, sc.goal)]) == -path.total_energy


def test_params_and_clone():
    est = AirGroundPlanner(optimize=False, overrides={"bas.seed": 3})
    assert est.get_params() == {"optimize": False, "overrides": {"bas.seed": 3}, "config": None}
    est.set_params(optimize=True)
    assert clone(est).optimize is True


def test_not_fitted():
    with pytest.raises(NotFittedError):
        AirGroundPlanner().predict([((0, 0), (1, 1))])


def test_validation_helpers(tmp_path):
    grid = synthesize_terrain(TerrainSpec(ncols=5, nrows=5))
    (tmp_path / "g.asc").write_text(write_dem(grid))
    assert check_terrain(str(tmp_path / "g.asc")).ncols == 5
    assert check_terrain(grid) is grid
    with pytest.raises(TypeError):
        check_terrain(42)
    assert check_index(grid, (1.0, 2.0)) == (1, 2)
    with pytest.raises(ContractError):
        check_index(grid, (5, 0))
    with pytest.raises(ContractError):
        check_index(grid, "ab c")
    with pytest.raises(ContractError):
        check_pairs(grid, [((0, 0),)])
