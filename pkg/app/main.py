import argparse
import json
import os
import sys
import traceback
from pathlib import Path
from typing import List, Optional

import numpy as np
from dotenv import load_dotenv
from loguru import logger
from pydantic import ValidationError

from app.analysis import phase_space_density, position_marginal
from app.models.config import AnalysisSettings, RunConfig
from app.services import ExperimentService
from app.utils.config_loader import (
    OUTPUT_DIR_ENV,
    collect_applied_defaults,
    format_validation_error,
    load_config,
)
from app.utils.errors import ConfigError, LevSqueezeError
from app.utils.io import ArtifactWriter, is_snapshot_csv, read_snapshots_csv, read_trace_csv

# 환경 변수 로드
load_dotenv()


def setup_logging(verbose: bool = False, log_file: Optional[Path] = None) -> None:
    """loguru 싱크 설정: stderr 와 선택적 파일"""
    logger.remove()
    logger.add(sys.stderr, level="DEBUG" if verbose else "INFO")
    if log_file is not None:
        logger.add(log_file, level="DEBUG", encoding="utf-8")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="levsqueeze",
        description="부상 나노입자 열 스퀴징 시뮬레이션 및 분석 도구",
    )
    parser.add_argument("--threads", type=int, default=1, help="최대 작업자 수 (결과는 스레드 수와 무관)")
    parser.add_argument("--verbose", action="store_true", help="DEBUG 로그 출력")
    parser.add_argument("--log-file", type=Path, default=None, help="로그 파일 경로")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="설정 파일의 kind 에 맞는 파이프라인 실행")
    run.add_argument("--config", type=Path, required=True)

    analyze = sub.add_parser("analyze", help="스냅샷 CSV 또는 (t, x) 시계열 분석")
    analyze.add_argument("--config", type=Path, default=None)
    analyze.add_argument("--input", type=Path, default=None)
    analyze.add_argument("--psd", action="store_true", help="Lorentzian PSD 보정")
    analyze.add_argument("--backbone", action="store_true", help="Duffing 백본 추정")
    analyze.add_argument("--output-dir", type=Path, default=None)

    calibrate = sub.add_parser("calibrate", help="평형 보정 실행과 닫힌 형태 물리량 보고")
    calibrate.add_argument("--config", type=Path, required=True)

    validate = sub.add_parser("validate-config", help="설정 검증 후 적용된 기본값 출력")
    validate.add_argument("--config", type=Path, required=True)

    plot = sub.add_parser("plot-data", help="gnuplot 용 열 파일 생성")
    plot.add_argument("--input", type=Path, required=True, help="스냅샷 CSV, Wigner .bin, 또는 (t, x) CSV")
    plot.add_argument("--output-dir", type=Path, default=None)
    plot.add_argument("--bins", type=int, default=121)
    return parser


def _analyze_config(args: argparse.Namespace) -> RunConfig:
    if args.config is not None:
        config = load_config(args.config)
        if config.kind != "analyze" or args.input or args.psd or args.backbone:
            base = config.analysis or AnalysisSettings()
            update = {}
            if args.input is not None:
                update["input"] = args.input
            if args.psd:
                update["psd"] = True
            if args.backbone:
                update["backbone"] = True
            analysis = AnalysisSettings.model_validate({**base.model_dump(exclude_unset=True), **update})
            config = RunConfig.model_validate(
                {**config.model_dump(exclude_unset=True), "kind": "analyze", "analysis": analysis}
            )
    else:
        if args.input is None:
            raise ConfigError("analyze 에는 --input 또는 --config 가 필요합니다", key_path="analysis.input")
        config = RunConfig(
            kind="analyze",
            analysis=AnalysisSettings(input=args.input, psd=args.psd, backbone=args.backbone),
        )
    return _with_output_dir(config, args.output_dir)


def _with_output_dir(config: RunConfig, output_dir: Optional[Path]) -> RunConfig:
    if output_dir is not None:
        return config.model_copy(update={"output_dir": output_dir})
    override = os.getenv(OUTPUT_DIR_ENV)
    if override and config.output_dir != Path(override):
        return config.model_copy(update={"output_dir": Path(override)})
    return config


def plot_data(path: Path, output_dir: Path, bins: int = 121) -> List[str]:
    """입력 종류에 맞춰 gnuplot 열 파일을 씁니다."""
    writer = ArtifactWriter(output_dir)
    if path.suffix == ".bin":
        header = json.loads(path.with_suffix(".json").read_text(encoding="utf-8"))
        values = np.fromfile(path, dtype="<f8").reshape(header["shape"])
        x0, dx, nx = header["x_internal"]
        p0, dp, n_p = header["p_internal"]
        x = x0 + dx * np.arange(int(nx))
        p = p0 + dp * np.arange(int(n_p))
        writer.write_gnuplot_grid(path.stem + ".dat", x, p, values)
        writer.write_gnuplot_columns(path.stem + "_marginal.dat", {"x": x, "W_x": values.sum(axis=1) * dp})
    elif is_snapshot_csv(path):
        for k, (t, points) in read_snapshots_csv(path).items():
            density = phase_space_density(points, bins=bins)
            marginal = position_marginal(density)
            writer.write_gnuplot_grid(f"density_k{k:03d}.dat", density.x_centers, density.p_centers, density.density)
            writer.write_gnuplot_columns(f"marginal_k{k:03d}.dat", {"x_m": marginal.x, "density": marginal.density})
    else:
        t, x = read_trace_csv(path)
        writer.write_gnuplot_columns(path.stem + ".dat", {"t": t, "x": x})
    logger.info(f"gnuplot 파일 {len(writer.written)}개 저장: {output_dir}")
    return writer.written


def error_report(e: BaseException) -> dict:
    """기계가 읽을 수 있는 오류 보고서"""
    if isinstance(e, LevSqueezeError):
        report = e.to_dict()
        if isinstance(e, ConfigError):
            report["key_path"] = e.key_path
    else:
        report = {
            "status": "error",
            "error_type": type(e).__name__,
            "error_msg": str(e),
            "module": None,
            "operation": None,
        }
    tb = e.__traceback__
    while tb is not None and tb.tb_next is not None:
        tb = tb.tb_next
    if tb is not None:
        report["file"] = tb.tb_frame.f_code.co_filename
        report["line"] = tb.tb_lineno
    return report


def main(argv: Optional[List[str]] = None) -> int:
    """
    CLI 진입점.

    Returns:
        int: 종료 코드 (0 성공, 1 설정 오류, 2 실행/수치 오류)
    """
    parser = build_parser()
    args = parser.parse_args(argv)
    setup_logging(args.verbose, args.log_file)

    try:
        try:
            _dispatch(args)
        except ValidationError as e:
            message, key_path = format_validation_error(e)
            raise ConfigError(f"설정 검증 오류: {message}", key_path=key_path) from e
        return 0
    except Exception as e:
        exit_code = e.exit_code if isinstance(e, LevSqueezeError) else 2
        if not isinstance(e, LevSqueezeError):
            logger.debug(traceback.format_exc())
        report = error_report(e)
        logger.error(f"{report['error_type']}: {report['error_msg']}")
        print(json.dumps(report, ensure_ascii=False, sort_keys=True), file=sys.stderr)
        return exit_code


def _dispatch(args: argparse.Namespace) -> None:
    if args.threads < 1:
        raise ConfigError("--threads 는 1 이상이어야 합니다", key_path="threads")
    service = ExperimentService(threads=args.threads)

    if args.command == "run":
        service.run(load_config(args.config))
    elif args.command == "analyze":
        service.run(_analyze_config(args))
    elif args.command == "calibrate":
        config = load_config(args.config)
        config = RunConfig.model_validate({**config.model_dump(exclude_unset=True), "kind": "calibrate"})
        service.run(_with_output_dir(config, None))
    elif args.command == "validate-config":
        config = load_config(args.config)
        payload = {
            "status": "ok",
            "config": config.model_dump(mode="json"),
            "applied_defaults": collect_applied_defaults(config),
        }
        print(json.dumps(payload, ensure_ascii=False, indent=2, sort_keys=True, default=str))
    elif args.command == "plot-data":
        output_dir = args.output_dir or Path(os.getenv(OUTPUT_DIR_ENV) or "output")
        plot_data(args.input, output_dir, bins=args.bins)


if __name__ == "__main__":
    sys.exit(main())
