"""
Check Executor - runs the property-verification suite from YAML check configurations
"""

import logging
import time
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional

import yaml

from .errors import ConfigError, HomogError
from ..evaluators.property_evaluator import PropertyEvaluator
from ..models.check import CheckConfig, CheckModule, CheckResult, CheckSeverity

logger = logging.getLogger(__name__)


class CheckExecutor:
    """
    Loads check configurations and routes each one to its PropertyEvaluator method
    """

    def __init__(self, config_dir: Optional[str] = None, evaluator: Optional[PropertyEvaluator] = None):
        if config_dir is None:
            config_dir = Path(__file__).parent.parent.parent / 'check_configs'

        self.config_dir = Path(config_dir)
        self.evaluator = evaluator or PropertyEvaluator()
        self.checks: Dict[str, CheckConfig] = {}

        self._load_checks()

    def _load_checks(self):
        """Load every check from the YAML files in config_dir"""
        yaml_files = sorted(self.config_dir.glob('*.yaml'))
        if not yaml_files:
            raise ConfigError(f"no check configurations in {self.config_dir}", key="config_dir")

        for yaml_file in yaml_files:
            try:
                with open(yaml_file, 'r', encoding='utf-8') as f:
                    config = yaml.safe_load(f)
            except (OSError, yaml.YAMLError) as e:
                raise ConfigError(f"cannot load {yaml_file.name}: {e}", key=yaml_file.name)
            if not config:
                continue

            loaded = 0
            for key, value in config.items():
                # 'suite' is the metadata block
                if key == 'suite' or not isinstance(value, list):
                    continue
                for check_data in value:
                    if not isinstance(check_data, dict) or 'check_id' not in check_data:
                        continue
                    check = self._parse_check_config(check_data, yaml_file.name)
                    self.checks[check.check_id] = check
                    loaded += 1
            logger.info("[%s] loaded %d checks", yaml_file.name, loaded)

        logger.info("Total checks loaded: %d", len(self.checks))

    def _parse_check_config(self, data: Dict[str, Any], source: str) -> CheckConfig:
        try:
            check = CheckConfig(
                check_id=data['check_id'],
                name=data['name'],
                description=data.get('description', ''),
                module=CheckModule(data['module']),
                check_type=data['check_type'],
                parameters=data.get('parameters') or {},
                severity=CheckSeverity(data.get('severity', 'major')),
                status=data.get('status', 'active'),
            )
        except (KeyError, ValueError) as e:
            raise ConfigError(f"{source}: malformed check {data.get('check_id')}: {e}",
                              key=str(data.get('check_id')))
        if not hasattr(self.evaluator, f"check_{check.check_type}"):
            raise ConfigError(f"{source}: unknown check_type '{check.check_type}'",
                              key=check.check_id)
        return check

    def select(self, modules: Optional[Iterable[str]] = None,
               check_ids: Optional[Iterable[str]] = None) -> List[CheckConfig]:
        wanted_modules = set(modules or [])
        wanted_ids = set(check_ids or [])
        unknown = wanted_ids - set(self.checks)
        if unknown:
            raise ConfigError(f"unknown check ids {sorted(unknown)}", key="checks")
        out = []
        for check_id in sorted(self.checks):
            check = self.checks[check_id]
            if wanted_modules and check.module.value not in wanted_modules:
                continue
            if wanted_ids and check_id not in wanted_ids:
                continue
            out.append(check)
        return out

    def execute_check(self, check_id: str) -> CheckResult:
        """
        Execute a single check

        Args:
            check_id: Check identifier

        Returns:
            CheckResult; evaluation errors become failed results
        """
        start_time = time.time()

        check = self.checks.get(check_id)
        if check is None:
            raise ConfigError(f"check {check_id} not found", key=check_id)

        result = CheckResult(check_id=check_id, name=check.name, module=check.module.value,
                             severity=check.severity)
        if check.status != "active":
            result.skipped = True
            result.passed = True
            result.message = f"check {check_id} is inactive"
            return result

        method = getattr(self.evaluator, f"check_{check.check_type}")
        try:
            measured, failures = method(check.parameters)
            result.measured = measured
            result.failures = failures
            result.passed = not failures
            result.message = "ok" if result.passed else "; ".join(failures)
        except HomogError as e:
            logger.error("Check %s raised %s: %s", check_id, type(e).__name__, e.message)
            result.failures = [f"{type(e).__name__}: {e.message}"]
            result.message = result.failures[0]

        result.execution_time_ms = int((time.time() - start_time) * 1000)
        logger.info("%s %s (%d ms)", check_id, result.status, result.execution_time_ms)
        return result

    def execute_all(self, modules: Optional[Iterable[str]] = None,
                    check_ids: Optional[Iterable[str]] = None) -> List[CheckResult]:
        return [self.execute_check(c.check_id) for c in self.select(modules, check_ids)]
