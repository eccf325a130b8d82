"""
Konfiguration för MPC-simulatorn
"""
import os
from dotenv import load_dotenv

# Ladda miljövariabler från .env fil
load_dotenv()


def _env_bool(name: str, default: str = "false") -> bool:
    return os.getenv(name, default).strip().lower() in ("1", "true", "yes", "ja")


class Config:
    """Konfigurationsklass för körningar, lösare och rapporter"""

    # Utdata
    OUTPUT_DIR = os.getenv("HECTOR_OUTPUT_DIR", "runs")
    WRITE_PDF = _env_bool("HECTOR_WRITE_PDF")
    QUIET = _env_bool("HECTOR_QUIET")

    # MPC-inställningar (tom sträng: scenariofilens värde gäller)
    MPC_FORMULATION = os.getenv("HECTOR_MPC_FORMULATION", "")

    # QP-lösare
    QP_TOL = float(os.getenv("HECTOR_QP_TOL", "1e-8"))
    QP_MAX_ITER = int(os.getenv("HECTOR_QP_MAX_ITER", "100"))

    # Versionssträngar som skrivs i summary.json
    VERSION = "hector-mpc 1.0.0"
    CSV_SCHEMA_VERSION = "trajectory-csv/1"

    FORMULATIONS = ("condensed", "noncondensed")

    @classmethod
    def validate(cls) -> bool:
        """Validera att alla konfigurationer har giltiga värden"""
        problems = []
        if cls.MPC_FORMULATION and cls.MPC_FORMULATION not in cls.FORMULATIONS:
            problems.append(f"HECTOR_MPC_FORMULATION={cls.MPC_FORMULATION!r}")
        if not cls.QP_TOL > 0:
            problems.append(f"HECTOR_QP_TOL={cls.QP_TOL}")
        if cls.QP_MAX_ITER < 1:
            problems.append(f"HECTOR_QP_MAX_ITER={cls.QP_MAX_ITER}")
        if not cls.OUTPUT_DIR:
            problems.append("HECTOR_OUTPUT_DIR")

        if problems:
            print(f"❌ Ogiltiga konfigurationer: {', '.join(problems)}")
            print("   Kopiera env_example.txt till .env och rätta värdena")
            return False
        return True
