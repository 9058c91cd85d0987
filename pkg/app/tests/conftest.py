import math
import sys
from pathlib import Path

import pytest
from loguru import logger

from app.models.classical import ClassicalPhysics
from app.models.physics import GasEnvironment, ParticleSpec, PulseProtocol, TrapSpec

CONFIG_DIR = Path(__file__).resolve().parent.parent / "config"

# 로그 설정
logger.remove()
logger.add(sys.stderr, level="WARNING")


@pytest.fixture
def config_dir() -> Path:
    return CONFIG_DIR


@pytest.fixture
def silica_particle() -> ParticleSpec:
    """지름 460 nm 실리카 입자"""
    return ParticleSpec(radius=230e-9)


@pytest.fixture
def low_pressure_gas() -> GasEnvironment:
    """1e-2 mbar, 300 K"""
    return GasEnvironment(pressure=1.0, temperature=300.0)


@pytest.fixture
def tweezer_trap() -> TrapSpec:
    return TrapSpec(waist_w0=854e-9, power_high=0.080, power_low=0.0568, frequency_hz=77e3)


@pytest.fixture
def unit_physics() -> ClassicalPhysics:
    """m = 1, ω = 2π (주기 1 s), k_B·T/m = 1 인 조화 진동자"""
    return ClassicalPhysics(
        mass=1.0,
        omega=2.0 * math.pi,
        gamma=2.0 * math.pi,
        temperature=1.0,
        force_model="linear",
        kB=1.0,
    )


@pytest.fixture
def no_pulses() -> PulseProtocol:
    return PulseProtocol(n_pulses=0).with_timing(2.0 * math.pi)


def write_config(path: Path, text: str) -> Path:
    path.write_text(text, encoding="utf-8")
    return path
