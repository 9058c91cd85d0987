import os
import tomllib
from pathlib import Path
from typing import Any, Dict, Tuple, Union

from loguru import logger
from pydantic import BaseModel, ValidationError

from app.models.config import REQUIRED_SECTIONS, RunConfig
from app.utils.errors import ConfigError

OUTPUT_DIR_ENV = "LEVSQUEEZE_OUTPUT_DIR"


def _key_path(loc: Tuple[Union[str, int], ...]) -> str:
    parts = []
    for item in loc:
        if isinstance(item, int):
            parts.append(f"[{item}]")
        else:
            parts.append(("." if parts else "") + str(item))
    return "".join(parts)


def format_validation_error(e: ValidationError) -> Tuple[str, str]:
    messages = []
    first_path = ""
    for error in e.errors():
        # 태그된 유니온/검증기 이름은 경로에서 제외
        loc = tuple(item for item in error["loc"] if not (isinstance(item, str) and "[" in item))
        path = _key_path(loc)
        first_path = first_path or path
        messages.append(f"{path or '<root>'}: {error['msg']}")
    return "; ".join(messages), first_path


def collect_applied_defaults(model: BaseModel, prefix: str = "") -> Dict[str, Any]:
    """파일에 없어서 기본값이 적용된 필드를 점 경로로 모읍니다."""
    applied: Dict[str, Any] = {}
    for name in type(model).model_fields:
        path = f"{prefix}.{name}" if prefix else name
        value = getattr(model, name)
        if name not in model.model_fields_set:
            if value is not None:
                applied[path] = value.model_dump(mode="json") if isinstance(value, BaseModel) else _plain(value)
            continue
        if isinstance(value, BaseModel):
            applied.update(collect_applied_defaults(value, path))
        elif isinstance(value, list):
            for i, item in enumerate(value):
                if isinstance(item, BaseModel):
                    applied.update(collect_applied_defaults(item, f"{path}[{i}]"))
    return applied


def _plain(value: Any) -> Any:
    if isinstance(value, Path):
        return str(value)
    return value


def load_config(path: Union[str, Path]) -> RunConfig:
    """
    설정 파일(TOML)을 읽고 검증합니다.

    Args:
        path: 설정 파일 경로

    Returns:
        RunConfig: 기본값이 적용된 설정

    Raises:
        ConfigError: 파싱 오류, 알 수 없는 키, 값 범위 위반
    """
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"설정 파일이 없습니다: {path}")

    try:
        with open(path, "rb") as f:
            raw = tomllib.load(f)
    except tomllib.TOMLDecodeError as e:
        raise ConfigError(f"설정 파일 파싱 오류 ({path}): {e}") from e

    if not raw:
        required = "; ".join(f"{kind}: {', '.join(sections)}" for kind, sections in REQUIRED_SECTIONS.items())
        raise ConfigError(f"빈 설정 파일입니다. 'kind' 와 필요한 섹션이 없습니다 ({required})", key_path="kind")

    # 최상위 master_seed 를 [simulation] 기본값으로 전달
    simulation = raw.get("simulation")
    if isinstance(simulation, dict) and "master_seed" not in simulation and "master_seed" in raw:
        simulation["master_seed"] = raw["master_seed"]

    try:
        config = RunConfig.model_validate(raw)
    except ValidationError as e:
        message, key_path = format_validation_error(e)
        raise ConfigError(f"설정 검증 오류: {message}", key_path=key_path) from e

    # 분석 입력 경로는 설정 파일 기준 상대경로
    if config.analysis is not None and config.analysis.input is not None and not config.analysis.input.is_absolute():
        candidate = path.parent / config.analysis.input
        if candidate.exists() and not config.analysis.input.exists():
            config = config.model_copy(
                update={"analysis": config.analysis.model_copy(update={"input": candidate})}
            )

    override = os.getenv(OUTPUT_DIR_ENV)
    if override:
        logger.info(f"{OUTPUT_DIR_ENV} 로 출력 디렉토리 지정: {override}")
        config = config.model_copy(update={"output_dir": Path(override)})

    logger.debug(f"설정 로드 완료: {path} (kind={config.kind})")
    return config
