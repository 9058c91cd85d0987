import math
import re
from concurrent.futures import ThreadPoolExecutor
from typing import Any, Dict, List, Optional

import numpy as np
from loguru import logger

from app.models.physics import CONSTANTS
from app.models.quantum import DensityMatrix, InitialStateSpec, WignerDistribution
from app.physics import recoil_decoherence_constant, recoil_rate, zero_point_fluctuation
from app.physics.trap import particle_mass
from app.services.base_service import BaseService
from app.simulator.quantum import (
    build_hamiltonian_terms,
    default_grid,
    gaussian_waist,
    length_scale,
    prepare_initial_state,
    propagate,
)
from app.simulator.wigner import (
    fock_populations,
    marginal_wigner_x,
    negativity_increment,
    purity,
    wigner_negativity,
    wigner_transform,
)
from app.utils.errors import GridError


def _slug(label: str) -> str:
    return re.sub(r"[^0-9A-Za-z_-]+", "_", label)


class QuantumService(BaseService):
    """밀도 행렬 전파 → Wigner 스냅샷 → 음수성/순도 시계열 파이프라인"""

    kind = "quantum"

    def execute(self) -> Dict[str, Any]:
        config = self.config
        settings = config.quantum
        omega = 2.0 * math.pi * settings.frequency_hz
        mass = particle_mass(config.particle)
        scale = length_scale(config.particle, settings.frequency_hz)
        dx_zpf = zero_point_fluctuation(mass, omega)

        if settings.potential == "gaussian":
            depth, waist = settings.depth_ratio, gaussian_waist(settings.depth_ratio)
        else:
            depth, waist = 0.0, math.inf
        grid = default_grid(settings.initial_states, waist, settings.n_points, settings.half_width, scale)
        terms = build_hamiltonian_terms(grid, depth, waist, potential=settings.potential)

        # 내부 시간 단위 1/ω
        protocol = config.protocol.with_timing(omega).scaled(1.0 / omega)
        gamma_over_omega = settings.decoherence.to_gamma_over_omega(dx_zpf, omega)
        decoherence = 2.0 * gamma_over_omega
        t_final = settings.duration * (2.0 * math.pi if settings.duration_unit == "periods" else 1.0)
        dt = 2.0 * math.pi / settings.steps_per_period

        logger.info(
            f"양자 격자: {grid.n_points}점, 반폭 {grid.half_width:.4g} L (L = {scale:.4g} m), "
            f"w₀ = {waist:.4g} L, Γ/ω = {gamma_over_omega:.3g}, t_final = {t_final:.4g}/ω "
            f"({settings.duration} {settings.duration_unit})"
        )

        states = settings.initial_states
        workers = min(self.threads, len(states))
        fft_workers = max(1, self.threads // workers)

        def work(spec: InitialStateSpec) -> Dict[str, Any]:
            return self._run_state(spec, grid, terms, protocol, t_final, decoherence, dt, fft_workers, omega)

        if workers > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                runs = list(pool.map(work, states))
        else:
            runs = [work(spec) for spec in states]

        results: Dict[str, Any] = {
            "units": {
                "length_scale_m": scale,
                "dx_zpf_m": dx_zpf,
                "time_unit_s": 1.0 / omega,
                "momentum_scale_kg_m_s": CONSTANTS.hbar / scale,
            },
            "grid": grid.model_dump(),
            "depth_ratio": depth,
            "waist_L": waist,
            "gamma_over_omega": gamma_over_omega,
            "lambda_recoil_hz_m2": settings.decoherence.to_lambda(dx_zpf, omega),
            "duration_interpretation": (
                f"{settings.duration} {settings.duration_unit} → ωt = {t_final:.6g}"
            ),
            "protocol_scaled": protocol.model_dump(),
            "states": runs,
        }
        if config.trap is not None:
            lam = recoil_decoherence_constant(config.trap, config.particle, config.trap.power_high)
            rate = recoil_rate(lam, dx_zpf)
            results["decoherence_estimate"] = {
                "lambda_recoil_hz_m2": lam,
                "gamma_hz": rate,
                "gamma_over_omega": rate / omega,
            }
            logger.info(f"광자 반동 추정: Λ = {lam:.4g} Hz/m², Γ = {rate:.4g} Hz, Γ/ω = {rate / omega:.3g}")
        self.writer.write_json("quantum_diagnostics.json", results)
        return results

    def _run_state(
        self, spec, grid, terms, protocol, t_final, decoherence, dt, fft_workers, omega
    ) -> Dict[str, Any]:
        settings = self.config.quantum
        name = _slug(spec.name)
        rho0 = prepare_initial_state(spec, grid)
        times: List[float] = []
        negativities: List[float] = []
        purities: List[float] = []
        saved: List[WignerDistribution] = []
        # 스냅샷마다 P(n); 격자가 n_max 를 담지 못하면 생략
        fock_series: Optional[List[List[float]]] = []
        try:
            fock_populations(rho0, settings.fock_n_max)
        except GridError as e:
            logger.warning(f"[{spec.name}] P(n) 시계열 생략: {e}")
            fock_series = None

        def on_snapshot(step: int, t: float, rho: DensityMatrix) -> None:
            W = wigner_transform(rho, oversample=settings.wigner_oversample, time=t)
            times.append(t)
            negativities.append(wigner_negativity(W))
            purities.append(purity(rho))
            if fock_series is not None:
                fock_series.append(fock_populations(rho, settings.fock_n_max).tolist())
            if settings.save_wigner == "all" or step == 0:
                saved.append(W)
            else:
                # "ends": 마지막 스냅샷만 유지
                if len(saved) > 1:
                    saved.pop()
                saved.append(W)

        logger.info(f"[{spec.name}] 전파 시작")
        final, _ = propagate(
            rho0,
            protocol,
            t_final,
            decoherence,
            dt,
            terms,
            snapshot_every=settings.snapshot_every,
            callback=on_snapshot,
            check_every=settings.check_every,
            positivity_every=settings.positivity_every,
            workers=fft_workers,
        )

        delta = negativity_increment(negativities)
        for W in saved:
            step = int(round(W.time / dt))
            tag = f"{name}_t{step:07d}"
            self.writer.write_matrix(
                f"wigner_{tag}.bin",
                W.values,
                {
                    "state": spec.name,
                    "time_internal": W.time,
                    "time_s": W.time / omega,
                    "x_internal": [float(W.x[0]), W.dx, int(W.x.size)],
                    "p_internal": [float(W.p[0]), W.dp, int(W.p.size)],
                    "length_scale_m": W.length_scale,
                    "units": "x: L, p: ħ/L, W: 1/ħ (SI: x·L, p·ħ/L, W/ħ)",
                },
            )
            x, wx = marginal_wigner_x(W)
            self.writer.write_columns(f"wigner_marginal_{tag}.csv", {"x_m": x * W.length_scale, "W_x": wx / W.length_scale})
            if W.x.size <= settings.wigner_csv_max_points and W.p.size <= settings.wigner_csv_max_points:
                xs, ps = np.meshgrid(W.x_si, W.p_si, indexing="ij")
                self.writer.write_columns(f"wigner_{tag}.csv", {"x_m": xs, "p_kg_m_s": ps, "W_si": W.values_si})

        levels = np.arange(settings.fock_n_max + 1)
        populations = {"n": levels}
        fock_report: Dict[str, Any] = {}
        try:
            populations["P_initial"] = fock_populations(rho0, settings.fock_n_max)
            populations["P_final"] = fock_populations(final, settings.fock_n_max)
            self.writer.write_columns(f"fock_{name}.csv", populations)
            fock_report = {"sum_initial": float(populations["P_initial"].sum()), "sum_final": float(populations["P_final"].sum())}
        except ValueError as e:
            logger.warning(f"[{spec.name}] Fock 점유 계산 생략: {e}")
            fock_report = {"error": str(e)}

        self.writer.write_columns(
            f"negativity_{name}.csv",
            {
                "t_internal": np.array(times),
                "t_s": np.array(times) / omega,
                "N": np.array(negativities),
                "delta_N": delta,
                "purity": np.array(purities),
            },
        )
        logger.info(
            f"[{spec.name}] 완료: N(0) = {negativities[0]:.4g}, N(t) = {negativities[-1]:.4g}, "
            f"ΔN = {delta[-1]:.4g}, 순도 {purities[0]:.4g} → {purities[-1]:.4g}"
        )
        return {
            "state": spec.model_dump(),
            "times_internal": times,
            "negativity": negativities,
            "delta_negativity": delta.tolist(),
            "purity": purities,
            "fock": fock_report,
            "fock_populations": fock_series,
        }
