"""Generate markdown summaries of verification reports."""
from pathlib import Path
from typing import Any, Dict, List, Optional


class MarkdownGenerator:
    """Render verify-* reports as markdown."""

    def get_status_indicator(self, passed: Optional[bool]) -> str:
        """Status symbol for a check."""
        if passed is None:
            return "⚪ n/a"
        return "🟢 PASS" if passed else "🔴 FAIL"

    def _fmt(self, value: Any) -> str:
        if isinstance(value, float):
            return f"{value:.6g}"
        return str(value)

    def _table(self, rows: List[Dict[str, Any]], columns: List[str]) -> List[str]:
        lines = ["| " + " | ".join(columns) + " |", "|" + "---|" * len(columns)]
        for row in rows:
            lines.append("| " + " | ".join(self._fmt(row.get(col, "")) for col in columns) + " |")
        return lines

    def _issues(self, issues: Dict[str, List[str]]) -> List[str]:
        lines = []
        for level in ('critical', 'warnings', 'info'):
            for message in issues.get(level, []):
                lines.append(f"- **{level}**: {message}")
        return lines

    def generate_report(self, command: str, report: Dict[str, Any], output_path: Path = None) -> str:
        """Markdown summary of one verification run."""
        lines = [f"# {command}", ""]
        config = report.get('config', {})
        if config:
            lines.extend(["## Configuration", ""])
            for key in sorted(config):
                if config[key] is not None:
                    lines.append(f"- {key}: `{config[key]}`")
            lines.append("")

        lines.extend(["## Result", "", f"Status: {self.get_status_indicator(report.get('passed'))}", ""])

        if 'estimates' in report:
            lines.extend(self._table(report['estimates'], ['t', 'value', 'stderr', 'n', 'passed']))
            lines.append("")
        if 'residuals' in report:
            lines.extend(self._table(report['residuals'],
                                     ['t', 'x', 'residual', 'stderr', 'quad_error', 'panels', 'passed']))
            lines.append("")
        if 'statistic' in report:
            lines.append(f"- chi-square statistic: {self._fmt(report['statistic'])}")
            lines.append(f"- p-value: {self._fmt(report['p_value'])}")
            lines.append("")
        if 'fraction_within' in report:
            lines.append(f"- target: {self._fmt(report['target'])}")
            if 'counting_rate' in report:
                lines.append(f"- counting rate: {self._fmt(report['counting_rate'])}")
            if 'pooled_median' in report:
                lines.append(f"- pooled median: {self._fmt(report['pooled_median'])}")
                lines.append(f"- mean of medians: {self._fmt(report['mean_median'])} "
                             f"(sd {self._fmt(report['sd_median'])})")
            lines.append(f"- share of paths within {self._fmt(report['rel_tol'])}: "
                         f"{self._fmt(report['fraction_within'])}")
            lines.append("")
        if 'ratio_limit' in report:
            lines.extend(["### Ratio limit", ""])
            lines.extend(self._table(report['ratio_limit'], ['k', 's', 'ratio', 'stderr', 'target', 'rel_error']))
            lines.extend(["", "### Small-fragment bound", ""])
            lines.extend(self._table(report['small_fragment'],
                                     ['y', 'ratio', 'stderr', 'bound', 'bound_holds', 'below_one']))
            lines.extend(["", f"- y*: {self._fmt(report['y_star'])}", ""])
        if report.get('issues'):
            issue_lines = self._issues(report['issues'])
            if issue_lines:
                lines.extend(["## Issues", ""] + issue_lines + [""])

        content = "\n".join(lines)
        if output_path:
            output_path = Path(output_path)
            output_path.parent.mkdir(parents=True, exist_ok=True)
            with open(output_path, 'w', encoding='utf-8') as f:
                f.write(content)
        return content
