"""
Chart generation functions using Plotly
"""
import numpy as np
import pandas as pd
import plotly.graph_objects as go
from plotly.subplots import make_subplots
from typing import Optional

# stand-in for exact agreement on a log axis
LOG_FLOOR = 1e-18


def create_deviation_chart(df: pd.DataFrame, title: str = "Check deviations", height: int = 500) -> go.Figure:
    """
    Bar chart of log10 deviation per check with its tolerance marker

    Args:
        df: DataFrame from RunReport.to_frame()
        title: Chart title
        height: Chart height in pixels

    Returns:
        Plotly figure object
    """
    fig = go.Figure()
    _add_deviation_traces(fig, df)
    fig.update_layout(
        title=title,
        template='plotly_white',
        height=height,
        yaxis_title='log10 deviation',
        xaxis=dict(tickangle=-45)
    )
    return fig


def _add_deviation_traces(fig: go.Figure, df: pd.DataFrame, row: Optional[int] = None) -> None:
    deviations = pd.to_numeric(df['deviation'], errors='coerce')
    # checks that raised have no deviation; plot them at the tolerance
    deviations = deviations.fillna(df['tolerance'] * 10)
    log_dev = np.log10(np.maximum(deviations.values.astype(float), LOG_FLOOR))
    colors = ['seagreen' if ok else 'crimson' for ok in df['passed']]
    kwargs = dict(row=row, col=1) if row is not None else {}
    fig.add_trace(go.Bar(x=df['name'], y=log_dev, marker_color=colors, name='deviation'), **kwargs)
    fig.add_trace(
        go.Scatter(
            x=df['name'], y=np.log10(df['tolerance'].values.astype(float)),
            mode='markers', marker=dict(symbol='line-ew-open', size=14, color='black'), name='tolerance'
        ),
        **kwargs
    )


def create_convergence_chart(df: pd.DataFrame, fit: Optional[dict] = None, height: int = 400) -> go.Figure:
    """
    Trotter error against slice count on log-log axes

    Args:
        df: DataFrame with columns: n_slices, error
        fit: Optional slope fit with slope and intercept
        height: Chart height in pixels

    Returns:
        Plotly figure object
    """
    fig = go.Figure()
    _add_convergence_traces(fig, df, fit)
    fig.update_layout(template='plotly_white', height=height, title='Trotter convergence')
    fig.update_xaxes(type='log', title='N_t')
    fig.update_yaxes(type='log', title='max coefficient error')
    return fig


def _add_convergence_traces(fig: go.Figure, df: pd.DataFrame, fit: Optional[dict], row: Optional[int] = None) -> None:
    kwargs = dict(row=row, col=1) if row is not None else {}
    fig.add_trace(
        go.Scatter(x=df['n_slices'], y=df['error'], mode='lines+markers', name='lattice error',
                   line=dict(width=2.5), marker=dict(size=8)),
        **kwargs
    )
    if fit and not fit.get('exact'):
        n = df['n_slices'].values.astype(float)
        fig.add_trace(
            go.Scatter(x=n, y=np.exp(fit['intercept']) * n ** fit['slope'], mode='lines',
                       line=dict(dash='dash'), name=f"slope {fit['slope']:.2f}"),
            **kwargs
        )


def create_report_figure(report_df: pd.DataFrame, convergence: Optional[pd.DataFrame] = None,
                         fit: Optional[dict] = None) -> go.Figure:
    """Deviation bars, plus the convergence curve when a lattice sweep ran"""
    if convergence is None:
        return create_deviation_chart(report_df)
    fig = make_subplots(rows=2, cols=1, subplot_titles=('Check deviations', 'Trotter convergence'),
                        vertical_spacing=0.25)
    _add_deviation_traces(fig, report_df, row=1)
    _add_convergence_traces(fig, convergence, fit, row=2)
    fig.update_xaxes(type='log', title_text='N_t', row=2, col=1)
    fig.update_yaxes(type='log', title_text='max coefficient error', row=2, col=1)
    fig.update_yaxes(title_text='log10 deviation', row=1, col=1)
    fig.update_layout(template='plotly_white', height=900, showlegend=True)
    return fig


def write_html(fig: go.Figure, path: str) -> None:
    fig.write_html(path, include_plotlyjs='cdn')
