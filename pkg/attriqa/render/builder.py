import logging
from datetime import datetime, timezone
from pathlib import Path

from jinja2 import Environment, FileSystemLoader

from attriqa.config.settings import settings
from attriqa.imaging.schedule import DEFAULT_LEVELS, schedule_rows
from attriqa.metrics.report import MetricReport

logger = logging.getLogger(__name__)

SCHEDULES_NAME = "schedules.md"
REPORT_NAME = "report.md"


class ReportBuilder:
    """Markdown reference documents from the package templates."""

    def __init__(self, output_dir: Path | str | None = None):
        self.output_dir = Path(output_dir) if output_dir else None
        self.env = Environment(
            loader=FileSystemLoader(settings.templates_dir),
            keep_trailing_newline=True,
            trim_blocks=True,
            lstrip_blocks=True,
        )
        self.env.filters["num"] = lambda v, digits=4: "n/a" if v is None else f"{v:.{digits}f}"
        self.env.filters["short"] = lambda d: (d or "")[:12]

    def render_string(self, template_name: str, **kwargs) -> str:
        template = self.env.get_template(template_name)
        return template.render(**kwargs)

    def _render_template(self, template_name: str, output_rel_path: str, **kwargs) -> Path:
        if self.output_dir is None:
            raise ValueError("ReportBuilder has no output directory")
        dest = self.output_dir / output_rel_path
        dest.parent.mkdir(parents=True, exist_ok=True)
        with open(dest, "w", encoding="utf-8", newline="\n") as f:
            f.write(self.render_string(template_name, **kwargs))
        return dest

    def build_schedules(self, levels: int = DEFAULT_LEVELS) -> Path:
        path = self._render_template(
            "schedules.md.j2", SCHEDULES_NAME, levels=levels, rows=schedule_rows(levels)
        )
        logger.info(f"Schedule reference written to {path}")
        return path

    def build_report(self, report: MetricReport, title: str = "Evaluation") -> Path:
        path = self._render_template(
            "report.md.j2",
            REPORT_NAME,
            title=title,
            report=report,
            generated=datetime.now(timezone.utc).strftime("%Y-%m-%d %H:%M UTC"),
        )
        logger.info(f"Report written to {path}")
        return path


def schedule_document(levels: int = DEFAULT_LEVELS) -> str:
    """The distortion schedule table as Markdown."""
    return ReportBuilder().render_string(
        "schedules.md.j2", levels=levels, rows=schedule_rows(levels)
    )
