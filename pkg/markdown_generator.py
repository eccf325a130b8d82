"""
Markdown-generator för körningar
Skapar en läsbar sammanfattning (summary.md) av summary.json
"""
import os
from datetime import datetime
from typing import Any, Dict, List, Optional

from model import JOINT_NAMES

CHANNEL_UNITS = {"vx": "m/s", "vy": "m/s", "yaw_rate": "rad/s", "z": "m", "roll": "rad", "pitch": "rad"}


class RunMarkdownGenerator:
    """Genererar Markdown-dokument från en körnings sammanfattning"""

    def __init__(self, output_dir: Optional[str] = None):
        """
        Initiera Markdown-generatorn

        Args:
            output_dir: Mapp där summary.md skrivs
        """
        self.output_dir = output_dir or 'runs'
        os.makedirs(self.output_dir, exist_ok=True)

    def generate(self, summary: Dict[str, Any], filename: str = 'summary.md') -> str:
        """
        Generera Markdown för en körning

        Args:
            summary: Sammanfattning enligt summary.json
            filename: Filnamn i output_dir

        Returns:
            Sökväg till genererad Markdown-fil
        """
        filepath = os.path.join(self.output_dir, filename)
        with open(filepath, 'w', encoding='utf-8') as f:
            f.write(self._build_markdown(summary))
        return filepath

    def _build_markdown(self, summary: Dict[str, Any]) -> str:
        """Bygg Markdown-innehåll"""
        metrics = summary['metrics']
        scenario = summary['scenario']
        lines = []

        # Frontmatter med metadata
        lines.append('---')
        lines.append(f'scenario: {summary["scenario_name"]}')
        lines.append(f'formulation: {summary["formulation"]}')
        lines.append(f'fall: {str(metrics["fall"]).lower()}')
        lines.append(f'exit_code: {summary["exit_code"]}')
        lines.append(f'version: {summary["version"]}')
        lines.append(f'schema_version: {summary["schema_version"]}')
        lines.append('---')
        lines.append('')

        status_icon = '❌' if metrics['fall'] else '✅'
        lines.append(f'# {status_icon} {summary["scenario_name"]}')
        lines.append('')

        lines.append('## Översikt')
        lines.append('')
        lines.append('| Fält | Värde |')
        lines.append('|------|-------|')
        lines.append(f'| **Längd** | {metrics["duration"]:.3f} s ({metrics["ticks"]} ticks) |')
        lines.append(f'| **Gång** | {scenario["gait"]["mode"]} |')
        lines.append(f'| **Terräng** | {scenario["terrain"]["kind"]} |')
        lines.append(f'| **MPC** | h = {scenario["mpc"]["horizon"]}, dt = {scenario["mpc"]["dt"]} s, '
                     f'{scenario["mpc"]["frequency"]} Hz |')
        lines.append(f'| **Sträcka** | {metrics["distance"]:.3f} m |')
        if metrics['fall']:
            lines.append(f'| **Fall** | t = {metrics["fall_time"]:.3f} s |')
        lines.append('')

        lines.append('## Följningsfel (RMSE)')
        lines.append('')
        lines.append('| Kanal | RMSE |')
        lines.append('|-------|------|')
        for channel, value in metrics['rmse'].items():
            lines.append(f'| {channel} | {value:.4g} {CHANNEL_UNITS.get(channel, "")} |')
        lines.append('')

        solve = metrics['solve_ms']
        lines.append('## MPC-lösare')
        lines.append('')
        lines.append(f'- Lösningar: {solve["count"]}')
        lines.append(f'- Medel: {self._format_ms(solve["mean"])}, p95: {self._format_ms(solve["p95"])}, '
                     f'max: {self._format_ms(solve["max"])}')
        lines.append(f'- Misslyckade lösningar: {metrics["solver_failures"]}')
        lines.append(f'- Största villkorsöverträdelse: {metrics["max_violation"]:.3e}')
        lines.append('')

        recovery = metrics.get('recovery_times') or []
        if recovery:
            lines.append('## Störningar')
            lines.append('')
            for index, value in enumerate(recovery, 1):
                text = f'{value:.3f} s' if value is not None else 'ingen återhämtning'
                lines.append(f'- Störning {index}: {text}')
            lines.append('')

        lines.append('## Ledmoment')
        lines.append('')
        lines.append('| Led | Största |τ| [N·m] | Andel av gräns |')
        lines.append('|-----|----------------|----------------|')
        for name, peak, ratio in zip(self._joint_labels(), metrics['peak_torque'], metrics['torque_ratio']):
            flag = ' ⚠️' if ratio >= 1.0 - 1e-9 else ''
            lines.append(f'| {name} | {peak:.2f} | {ratio:.0%}{flag} |')
        lines.append('')
        lines.append(f'Mättade ticks: {metrics["saturated_ticks"]}')
        lines.append('')

        events = summary.get('events', {})
        if events.get('counts'):
            lines.append('## Händelser')
            lines.append('')
            for kind, count in sorted(events['counts'].items()):
                lines.append(f'- `{kind}`: {count}')
            lines.append('')

        lines.append('---')
        lines.append('')
        lines.append(f'*Genererad: {datetime.now().strftime("%Y-%m-%d %H:%M")} ({summary["version"]})*')
        lines.append('')
        return '\n'.join(lines)

    @staticmethod
    def _joint_labels() -> List[str]:
        return [f'{side} {joint}' for side in ('vänster', 'höger') for joint in JOINT_NAMES]

    @staticmethod
    def _format_ms(value: Optional[float]) -> str:
        return 'N/A' if value is None else f'{value:.2f} ms'
