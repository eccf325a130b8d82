"""
Undantag som delas av alla moduler
"""
from typing import Optional, Dict


class HectorError(Exception):
    """Basklass för alla fel i paketet"""


class ConfigError(HectorError):
    """Ogiltig konfiguration (modell, gång, MPC eller scenariofil)"""

    def __init__(self, message: str, key: Optional[str] = None, line: Optional[int] = None):
        self.key = key
        self.line = line
        self.detail = message
        prefix = ""
        if line is not None:
            prefix += f"line {line}: "
        if key:
            prefix += f"{key}: "
        super().__init__(prefix + message)


class SingularityError(HectorError):
    """Pitch för nära ±90° för att invertera Euler-hastighetsavbildningen"""


class AssemblyError(HectorError):
    """Inkonsistenta dimensioner när QP-problemet byggs"""


class InfeasibleError(HectorError):
    """QP-problemet saknar tillåten lösning"""

    def __init__(self, message: str, row: Optional[int] = None, label: Optional[str] = None,
                 violation: float = float("nan")):
        self.row = row
        self.label = label
        self.violation = violation
        detail = f" (most violated: {label or row}, violation {violation:.3g})" if row is not None else ""
        super().__init__(message + detail)


class IterationLimitError(HectorError):
    """QP-lösaren konvergerade inte inom max antal iterationer"""

    def __init__(self, message: str, residuals: Optional[Dict[str, float]] = None, solution=None):
        self.residuals = residuals or {}
        self.solution = solution
        super().__init__(message)


class UnreachableTargetError(HectorError):
    """Invers kinematik hittade ingen lösning för målpositionen"""


class ContractViolationError(HectorError):
    """Sving- och stödkrafter blandades för samma ben"""
