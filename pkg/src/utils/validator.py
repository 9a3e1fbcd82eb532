"""
JSON Schema checks for toolkit parameter files and scenario files.

Schemas live in src/schemas and are compiled once per validator. Every
violation becomes one line of the ConfigurationError message, with the path
written as `gains -> x1 -> poles -> 1`.
"""

import json
from pathlib import Path
from typing import Any, Callable, Optional

import structlog
from jsonschema import Draft7Validator, FormatChecker, ValidationError
from jsonschema.exceptions import SchemaError

from src.utils.errors import ConfigurationError

logger = structlog.get_logger(__name__)

SCHEMA_DIR = Path(__file__).resolve().parent.parent / "schemas"


def _path(error: ValidationError) -> str:
    return " -> ".join(str(p) for p in error.absolute_path) or "(root)"


_FORMATS: dict[str, Callable[[ValidationError, str], str]] = {
    "required": lambda e, at: f"Missing required field '{e.message.split(chr(39))[1]}' at {at}",
    "type": lambda e, at: f"Type mismatch at '{at}': {e.message} (expected {e.validator_value})",
    "minimum": lambda e, at: f"Value too small at '{at}': {e.message}",
    "exclusiveMinimum": lambda e, at: f"Value too small at '{at}': {e.message}",
    "minItems": lambda e, at: f"Value too small at '{at}': {e.message}",
    "maximum": lambda e, at: f"Value too large at '{at}': {e.message}",
    "exclusiveMaximum": lambda e, at: f"Value too large at '{at}': {e.message}",
    "enum": lambda e, at: f"Invalid value at '{at}': {e.message} (allowed: {e.validator_value})",
    "additionalProperties": lambda e, at: f"Unknown field at '{at}': {e.message}",
}


def describe(error: ValidationError) -> str:
    """One line for one violation."""
    fmt = _FORMATS.get(str(error.validator))
    at = _path(error)
    return fmt(error, at) if fmt else f"Validation error at '{at}': {error.message}"


def _read_json(path: Path, what: str) -> Any:
    try:
        with open(path, "r", encoding="utf-8") as f:
            return json.load(f)
    except json.JSONDecodeError as e:
        logger.error("invalid_json", path=str(path), error=str(e))
        raise ConfigurationError(f"Invalid JSON in {what}: {e}") from e


class ConfigValidator:
    """Validates parsed documents and JSON files against the toolkit schemas."""

    def __init__(self, schema_dir: Optional[Path] = None):
        self.schema_dir = schema_dir or SCHEMA_DIR
        self._schemas: dict[str, dict[str, Any]] = {}
        self._validators: dict[str, Draft7Validator] = {}

    def load_schema(self, schema_name: str) -> dict[str, Any]:
        """
        Load (once) and self-check a schema.

        Raises:
            ConfigurationError: If the file is missing, not JSON, or not a
                valid Draft 7 schema
        """
        if schema_name in self._schemas:
            return self._schemas[schema_name]

        schema_path = self.schema_dir / schema_name
        if not schema_path.exists():
            logger.error("schema_not_found", schema_name=schema_name, schema_path=str(schema_path))
            raise ConfigurationError(f"Schema file not found: {schema_path}")

        schema = _read_json(schema_path, f"schema {schema_name}")
        try:
            Draft7Validator.check_schema(schema)
        except SchemaError as e:
            raise ConfigurationError(f"Schema {schema_name} is not a valid schema: {e.message}") from e
        self._schemas[schema_name] = schema
        self._validators[schema_name] = Draft7Validator(schema, format_checker=FormatChecker())
        logger.debug("schema_loaded", schema_name=schema_name)
        return schema

    def issues(self, document: Any, schema_name: str) -> list[str]:
        """Every violation of `document`, ordered by path; empty when valid."""
        self.load_schema(schema_name)
        errors = sorted(
            self._validators[schema_name].iter_errors(document),
            key=lambda e: [str(p) for p in e.absolute_path],
        )
        return [describe(e) for e in errors]

    def validate(self, config: dict[str, Any], schema_name: str) -> None:
        """
        Raises:
            ConfigurationError: One header line, then one line per violation
        """
        problems = self.issues(config, schema_name)
        if not problems:
            logger.debug("validation_passed", schema_name=schema_name)
            return
        logger.warning("validation_failed", schema_name=schema_name, error_count=len(problems))
        lines = [f"Validation failed for {schema_name}:", *(f"  * {p}" for p in problems)]
        raise ConfigurationError("\n".join(lines))

    def validate_file(self, config_path: Path | str, schema_name: str) -> dict[str, Any]:
        """
        Load and validate a JSON file.

        Raises:
            ConfigurationError: If the file is missing, not JSON, or invalid
        """
        config_path = Path(config_path)
        if not config_path.exists():
            logger.error("config_file_not_found", config_path=str(config_path))
            raise ConfigurationError(f"Configuration file not found: {config_path}")

        try:
            config = _read_json(config_path, config_path.name)
        except ConfigurationError as e:
            raise ConfigurationError(
                f"{e}\nCheck for trailing commas, missing quotes, or invalid syntax."
            ) from e.__cause__

        self.validate(config, schema_name)
        logger.info("file_validated", config_path=str(config_path), schema_name=schema_name)
        return config
