import numpy as np
import pandas as pd
import plotly.graph_objects as go
from pytest import mark

from utils.explanations import describe_check, generate_explanations
from utils.helpers import format_deviation, load_report, save_report, strip_wall_times, summarize_frame
from visualizations.charts import (
    create_convergence_chart,
    create_deviation_chart,
    create_report_figure,
    write_html,
)


def report_frame():
    return pd.DataFrame([
        {'name': 'associativity', 'suite': 'grassmann', 'routes': 'algebra law', 'deviation': 0.0,
         'tolerance': 1e-12, 'passed': True, 'wall_time': 0.01, 'detail': ''},
        {'name': 'eq58-kernel-t0.7', 'suite': 'second-class', 'routes': 'operator-side vs closed-form',
         'deviation': 3e-9, 'tolerance': 1e-12, 'passed': False, 'wall_time': 0.2, 'detail': 't=0.7'},
        {'name': 'eq39-lattice', 'suite': 'lattice', 'routes': 'lattice vs closed-form', 'deviation': None,
         'tolerance': 1e-12, 'passed': False, 'wall_time': 0.1, 'detail': 'PlanError: boom'},
    ])


def convergence_frame():
    n = np.array([2, 4, 8, 16])
    return pd.DataFrame({'n_slices': n, 'error': 0.5 / n})


class TestHelpers:

    @mark.parametrize("value, expected", [
        (None, "n/a"), (float("inf"), "n/a"), (float("nan"), "n/a"), (0.0, "exact"), (3.2123e-15, "3.21e-15"),
    ])
    def test_format_deviation(self, value, expected):
        assert format_deviation(value) == expected

    def test_report_round_trip_sorts_keys(self, tmp_path):
        path = tmp_path / "nested" / "report.json"
        save_report({'b': 1, 'a': {'wall_time': 0.3, 'x': [1, {'wall_time': 2}]}}, str(path))
        text = path.read_text()
        assert text.index('"a"') < text.index('"b"')
        assert strip_wall_times(load_report(str(path))) == {'a': {'x': [1, {}]}, 'b': 1}

    def test_summarize_frame(self):
        summary = summarize_frame(report_frame())
        assert list(summary['suite']) == ['grassmann', 'second-class', 'lattice']
        assert list(summary['passed']) == [1, 0, 0]


class TestExplanations:

    def test_describe_check(self):
        assert describe_check("eq39-lattice")
        assert describe_check("no-such-thing") == []

    def test_only_failures_are_explained(self):
        lines = generate_explanations(report_frame())
        assert len(lines) == 2
        assert lines[0].startswith("- second-class/eq58-kernel-t0.7:")
        assert "(PlanError: boom)" in lines[1]

    def test_empty_frame(self):
        assert generate_explanations(pd.DataFrame()) == []


class TestCharts:

    def test_deviation_chart(self):
        fig = create_deviation_chart(report_frame())
        assert isinstance(fig, go.Figure)
        assert len(fig.data) == 2
        assert fig.data[0].marker.color == ('seagreen', 'crimson', 'crimson')

    def test_convergence_chart_with_fit(self):
        fig = create_convergence_chart(convergence_frame(), {'slope': -1.0, 'intercept': np.log(0.5), 'exact': False})
        assert len(fig.data) == 2
        assert np.allclose(fig.data[1].y, 0.5 / np.array([2, 4, 8, 16]))

    def test_exact_fit_draws_no_line(self):
        fig = create_convergence_chart(convergence_frame(), {'exact': True})
        assert len(fig.data) == 1

    def test_report_figure_and_html(self, tmp_path):
        fig = create_report_figure(report_frame(), convergence_frame(), None)
        assert len(fig.data) == 3
        path = tmp_path / "report.html"
        write_html(fig, str(path))
        assert "plotly" in path.read_text().lower()
