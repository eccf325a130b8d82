"""
PDF-generator för körningar
Skapar en rapport med mätetal, ledmoment och diagram över krafter och höjd
"""
import os
from datetime import datetime
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from reportlab.graphics.charts.legends import LineLegend
from reportlab.graphics.charts.lineplots import LinePlot
from reportlab.graphics.shapes import Drawing, String
from reportlab.lib import colors
from reportlab.lib.pagesizes import A4
from reportlab.lib.styles import ParagraphStyle, getSampleStyleSheet
from reportlab.lib.units import mm
from reportlab.platypus import HRFlowable, Paragraph, SimpleDocTemplate, Spacer, Table, TableStyle

from config import Config
from model import JOINT_NAMES
from sim import SimLog

MAX_CHART_POINTS = 600


class RunPDFGenerator:
    """Genererar PDF-rapporter från en körnings sammanfattning och logg"""

    COLORS = {
        'primary': colors.HexColor('#0052CC'),
        'secondary': colors.HexColor('#172B4D'),
        'accent': colors.HexColor('#00875A'),
        'warning': colors.HexColor('#FF991F'),
        'error': colors.HexColor('#DE350B'),
        'light_bg': colors.HexColor('#F4F5F7'),
        'border': colors.HexColor('#DFE1E6'),
        'text': colors.HexColor('#172B4D'),
        'text_light': colors.HexColor('#5E6C84'),
    }

    def __init__(self, output_dir: Optional[str] = None):
        """
        Initiera PDF-generatorn

        Args:
            output_dir: Mapp för rapporten
        """
        self.output_dir = output_dir or Config.OUTPUT_DIR
        os.makedirs(self.output_dir, exist_ok=True)
        self.styles = self._create_styles()

    def _create_styles(self) -> Dict[str, ParagraphStyle]:
        """Skapa anpassade textstilar"""
        base_styles = getSampleStyleSheet()
        return {
            'title': ParagraphStyle(
                'Title',
                parent=base_styles['Heading1'],
                fontSize=22,
                textColor=self.COLORS['secondary'],
                spaceAfter=4*mm,
                fontName='Helvetica-Bold'
            ),
            'heading': ParagraphStyle(
                'Heading',
                parent=base_styles['Heading2'],
                fontSize=14,
                textColor=self.COLORS['secondary'],
                spaceBefore=6*mm,
                spaceAfter=3*mm,
                fontName='Helvetica-Bold',
            ),
            'body': ParagraphStyle(
                'Body',
                parent=base_styles['Normal'],
                fontSize=10,
                textColor=self.COLORS['text'],
                spaceAfter=2*mm,
                leading=14
            ),
            'field_label': ParagraphStyle(
                'FieldLabel',
                parent=base_styles['Normal'],
                fontSize=9,
                textColor=self.COLORS['text_light'],
                fontName='Helvetica-Bold'
            ),
            'field_value': ParagraphStyle(
                'FieldValue',
                parent=base_styles['Normal'],
                fontSize=10,
                textColor=self.COLORS['text'],
            ),
        }

    def generate(self, summary: Dict[str, Any], log: SimLog, filename: str = 'report.pdf') -> str:
        """
        Generera PDF-rapport för en körning

        Args:
            summary: Sammanfattning enligt summary.json
            log: Simuleringslogg för diagrammen
            filename: Filnamn i output_dir

        Returns:
            Sökväg till genererad PDF
        """
        filepath = os.path.join(self.output_dir, filename)
        doc = SimpleDocTemplate(
            filepath,
            pagesize=A4,
            rightMargin=20*mm,
            leftMargin=20*mm,
            topMargin=20*mm,
            bottomMargin=20*mm
        )

        story = []
        story.append(Paragraph(self._escape_html(summary['scenario_name']), self.styles['title']))
        story.extend(self._build_status_row(summary))
        story.append(Spacer(1, 3*mm))
        story.append(HRFlowable(width="100%", thickness=1, color=self.COLORS['border'], spaceAfter=3*mm))
        story.extend(self._build_metrics_section(summary))
        story.extend(self._build_torque_section(summary))
        story.extend(self._build_charts_section(summary, log))
        story.extend(self._build_footer(summary))

        doc.build(story)
        return filepath

    def _build_status_row(self, summary: Dict[str, Any]) -> List:
        metrics = summary['metrics']
        if metrics['fall']:
            status, color = f"Fall vid {metrics['fall_time']:.3f} s", self.COLORS['error']
        else:
            status, color = "Inget fall", self.COLORS['accent']

        row = [[
            Paragraph(f"<b>Status:</b> <font color='{color.hexval()}'>{status}</font>",
                      self.styles['field_value']),
            Paragraph(f"<b>Formulering:</b> {summary['formulation']}", self.styles['field_value']),
        ]]
        table = Table(row, colWidths=[85*mm, 85*mm])
        table.setStyle(TableStyle([
            ('VALIGN', (0, 0), (-1, -1), 'MIDDLE'),
            ('LEFTPADDING', (0, 0), (-1, -1), 0),
        ]))
        return [table]

    def _build_metrics_section(self, summary: Dict[str, Any]) -> List:
        """Bygg tabell med följningsfel och lösartider"""
        metrics = summary['metrics']
        solve = metrics['solve_ms']
        elements = [Paragraph("Mätetal", self.styles['heading'])]

        details = [('Längd', f"{metrics['duration']:.3f} s ({metrics['ticks']} ticks)"),
                   ('Sträcka', f"{metrics['distance']:.3f} m")]
        for channel, value in metrics['rmse'].items():
            details.append((f'RMSE {channel}', f'{value:.4g}'))
        details.append(('MPC-lösningar', str(solve['count'])))
        if solve['mean'] is not None:
            details.append(('Lösningstid medel / p95', f"{solve['mean']:.2f} / {solve['p95']:.2f} ms"))
        details.append(('Misslyckade lösningar', str(metrics['solver_failures'])))
        details.append(('Största villkorsöverträdelse', f"{metrics['max_violation']:.3e}"))
        for index, value in enumerate(metrics.get('recovery_times') or [], 1):
            details.append((f'Återhämtning störning {index}', 'N/A' if value is None else f'{value:.3f} s'))

        elements.append(self._field_table(details))
        return elements

    def _build_torque_section(self, summary: Dict[str, Any]) -> List:
        metrics = summary['metrics']
        elements = [Paragraph("Ledmoment", self.styles['heading'])]
        rows = [['Led', 'Största |τ| [N·m]', 'Andel av gräns']]
        labels = [f'{side} {joint}' for side in ('vänster', 'höger') for joint in JOINT_NAMES]
        for name, peak, ratio in zip(labels, metrics['peak_torque'], metrics['torque_ratio']):
            rows.append([name, f'{peak:.2f}', f'{ratio:.0%}'])

        table = Table(rows, colWidths=[60*mm, 50*mm, 50*mm])
        style = [
            ('BACKGROUND', (0, 0), (-1, 0), self.COLORS['light_bg']),
            ('FONTNAME', (0, 0), (-1, 0), 'Helvetica-Bold'),
            ('FONTSIZE', (0, 0), (-1, -1), 9),
            ('GRID', (0, 0), (-1, -1), 0.5, self.COLORS['border']),
        ]
        for row, ratio in enumerate(metrics['torque_ratio'], 1):
            if ratio >= 1.0 - 1e-9:
                style.append(('TEXTCOLOR', (2, row), (2, row), self.COLORS['warning']))
        table.setStyle(TableStyle(style))
        elements.append(table)
        elements.append(Paragraph(f"Mättade ticks: {metrics['saturated_ticks']}", self.styles['body']))
        return elements

    def _build_charts_section(self, summary: Dict[str, Any], log: SimLog) -> List:
        """Diagram över vertikal kontaktkraft och CoM-höjd"""
        if len(log) < 2:
            return []
        elements = [Paragraph("Diagram", self.styles['heading'])]
        times = log.times
        total_fz = log.inputs[:, 2] + log.inputs[:, 5]
        robot = summary["scenario"]["robot"]
        weight = (robot["mass"] + log.payload_mass) * robot["gravity"]
        elements.append(self._line_chart(
            "Vertikal kraft [N]", times,
            [("F1z + F2z", total_fz, self.COLORS['primary']),
             ("(m + m_o)·g", weight, self.COLORS['warning'])]))
        elements.append(Spacer(1, 4*mm))
        elements.append(self._line_chart(
            "CoM-höjd [m]", times,
            [("z", log.states[:, 2], self.COLORS['primary']),
             ("referens", log.reference[:, 3], self.COLORS['accent'])]))
        return elements

    def _line_chart(self, title: str, times: np.ndarray,
                    series: Sequence[Tuple[str, np.ndarray, colors.Color]]) -> Drawing:
        drawing = Drawing(170*mm, 70*mm)
        drawing.add(String(0, 66*mm, title, fontName='Helvetica-Bold', fontSize=10,
                           fillColor=self.COLORS['secondary']))

        step = max(len(times) // MAX_CHART_POINTS, 1)
        plot = LinePlot()
        plot.x, plot.y = 12*mm, 10*mm
        plot.width, plot.height = 150*mm, 50*mm
        plot.data = [list(zip(times[::step].tolist(), values[::step].tolist())) for _, values, _ in series]
        for index, (_, _, color) in enumerate(series):
            plot.lines[index].strokeColor = color
            plot.lines[index].strokeWidth = 1
        plot.xValueAxis.labelTextFormat = '%.1f'
        plot.yValueAxis.labelTextFormat = '%.2f'
        drawing.add(plot)

        legend = LineLegend()
        legend.x, legend.y = 120*mm, 66*mm
        legend.fontSize = 8
        legend.colorNamePairs = [(color, name) for name, _, color in series]
        drawing.add(legend)
        return drawing

    def _field_table(self, details: List[Tuple[str, str]]) -> Table:
        rows = [[Paragraph(label, self.styles['field_label']),
                 Paragraph(self._escape_html(value), self.styles['field_value'])]
                for label, value in details]
        table = Table(rows, colWidths=[70*mm, 100*mm])
        table.setStyle(TableStyle([
            ('VALIGN', (0, 0), (-1, -1), 'TOP'),
            ('LEFTPADDING', (0, 0), (-1, -1), 0),
            ('BOTTOMPADDING', (0, 0), (-1, -1), 2),
        ]))
        return table

    def _build_footer(self, summary: Dict[str, Any]) -> List:
        """Bygg dokumentfot med metadata"""
        elements = [Spacer(1, 8*mm),
                    HRFlowable(width="100%", thickness=0.5, color=self.COLORS['border'], spaceAfter=3*mm)]
        footer_text = f"<font size='8' color='#5E6C84'>" \
                      f"Genererad: {datetime.now().strftime('%Y-%m-%d %H:%M')} | " \
                      f"{summary['version']} | CSV-schema {summary['schema_version']}</font>"
        elements.append(Paragraph(footer_text, self.styles['body']))
        return elements

    def _escape_html(self, text: str) -> str:
        """Escape HTML-tecken för ReportLab"""
        if not text:
            return ''
        text = str(text)
        text = text.replace('&', '&amp;')
        text = text.replace('<', '&lt;')
        text = text.replace('>', '&gt;')
        return text
