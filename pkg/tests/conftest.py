import json
from pathlib import Path

import pytest

from exactmc.models import CoupledUpdate, HardCoreModel, IsingModel, build_lattice

CONFIG_DIR = Path(__file__).resolve().parents[1] / "src" / "exactmc" / "configs"
SHIPPED = sorted(CONFIG_DIR.glob("*.json"))


def ising_chain(n, beta, J=1.0, h=0.0, coupling="heat-bath", schedule="sequential"):
    return CoupledUpdate(IsingModel(build_lattice("chain", n), J, h, beta), coupling, schedule)


def ising_square(rows, cols, beta, J=1.0, h=0.0, coupling="heat-bath", schedule="sequential"):
    lat = build_lattice("square-open", rows=rows, cols=cols)
    return CoupledUpdate(IsingModel(lat, J, h, beta), coupling, schedule)


def hardcore_cycle(n=4, fugacity=1.0, coupling="heat-bath", schedule="sequential"):
    return CoupledUpdate(HardCoreModel(build_lattice("cycle", n), fugacity), coupling, schedule)


@pytest.fixture
def write_json(tmp_path):
    def _write(name, doc):
        path = tmp_path / name
        path.write_text(json.dumps(doc))
        return path
    return _write
