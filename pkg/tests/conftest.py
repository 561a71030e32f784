import pathlib

import pytest

from cbdsim import dsl

MODELS = pathlib.Path(__file__).resolve().parent.parent / "models"

RAMP_EDGE_CHAIN = """
cbd Chain(out step, d1, d2, d3, d4, held) {
  block rate = Constant(1);
  block ramp = Integrator(-0.5);
  block sw   = Switch();
  block da   = Derivative();
  block db   = Derivative();
  block dc   = Derivative();
  block dd   = Derivative();
  block acc  = Integrator(0);
  rate.out -> ramp.in;
  ramp.out -> sw.c;
  sw.out -> da.in;
  da.out -> db.in;
  db.out -> dc.in;
  dc.out -> dd.in;
  da.out -> acc.in;
  sw.out -> step;
  da.out -> d1;
  db.out -> d2;
  dc.out -> d3;
  dd.out -> d4;
  acc.out -> held;
}
"""


@pytest.fixture(scope="session")
def ball_path() -> pathlib.Path:
    return MODELS / "bouncing_ball.cbd"


@pytest.fixture(scope="session")
def ball_text(ball_path) -> str:
    return ball_path.read_text()


@pytest.fixture(scope="session")
def ball_model(ball_text):
    return dsl.load_model(ball_text)


@pytest.fixture(scope="session")
def chain_model():
    return dsl.load_model(RAMP_EDGE_CHAIN)
