"""
Fitness-curve reports as standalone plotly HTML
"""

import logging
from pathlib import Path
from typing import Dict, Mapping, Optional, Sequence, Union

import numpy as np
import pandas as pd
import plotly.graph_objects as go

PALETTE = ['#2b8cbe', '#d62728', '#2ca02c', '#9467bd', '#f28e2b', '#8c564b', '#17becf', '#7f7f7f']


def _layout(fig: go.Figure, title: str, x_title: str, y_title: str, log_y: bool = False):
    fig.update_layout(
        height=420,
        margin=dict(l=60, r=20, t=50, b=50),
        showlegend=True,
        legend=dict(orientation="h", yanchor="top", y=-0.15, xanchor="center", x=0.5),
        plot_bgcolor='white',
        title=dict(text=title, x=0.5, xanchor='center'),
        xaxis=dict(title=dict(text=x_title), gridcolor='rgba(0,0,0,0.08)'),
        yaxis=dict(title=dict(text=y_title), gridcolor='rgba(0,0,0,0.08)',
                   type='log' if log_y else 'linear'),
    )


def create_fitness_curve_chart(traces: Mapping[str, Sequence[Sequence[float]]], title: str,
                               log_y: bool = True) -> go.Figure:
    """Mean best-fitness curve per label with a min/max band over trials"""
    fig = go.Figure()
    for i, (label, rows) in enumerate(traces.items()):
        data = np.atleast_2d(np.asarray(rows, dtype=np.float64))
        x = np.arange(1, data.shape[1] + 1)
        color = PALETTE[i % len(PALETTE)]
        if data.shape[0] > 1:
            fig.add_trace(go.Scatter(
                x=np.concatenate([x, x[::-1]]),
                y=np.concatenate([data.max(axis=0), data.min(axis=0)[::-1]]),
                fill='toself',
                fillcolor=color,
                opacity=0.15,
                line=dict(width=0),
                hoverinfo='skip',
                showlegend=False,
            ))
        fig.add_trace(go.Scatter(x=x, y=data.mean(axis=0), mode='lines', name=label,
                                 line=dict(color=color, width=2)))

    positive = all(np.all(np.asarray(rows, dtype=np.float64) > 0) for rows in traces.values())
    _layout(fig, title, "Iteration", "Best fitness", log_y=log_y and positive)
    return fig


def create_evolution_chart(best_trace: Sequence[float], evolution_trace: Sequence[float],
                           title: str) -> go.Figure:
    """Best-so-far and per-evolution best LFV"""
    x = np.arange(1, len(best_trace) + 1)
    fig = go.Figure()
    fig.add_trace(go.Scatter(x=x, y=list(evolution_trace), mode='markers', name='Best LFV this evolution',
                             marker=dict(color=PALETTE[1], size=5)))
    fig.add_trace(go.Scatter(x=x, y=list(best_trace), mode='lines', name='Best LFV so far',
                             line=dict(color=PALETTE[0], width=2)))
    finite = np.asarray([v for v in best_trace if np.isfinite(v)])
    _layout(fig, title, "Evolution", "LFV", log_y=finite.size > 0 and bool(np.all(finite > 0)))
    return fig


def create_frame_metrics_chart(frames: pd.DataFrame, title: str) -> go.Figure:
    """Iterations and path length per frame"""
    fig = go.Figure()
    fig.add_trace(go.Bar(x=frames['frame'], y=frames['iterations'], name='Iterations',
                         marker=dict(color=PALETTE[0]), opacity=0.6))
    fig.add_trace(go.Scatter(x=frames['frame'], y=frames['path_length'], mode='lines', name='Path length (cm)',
                             line=dict(color=PALETTE[1], width=2), yaxis='y2'))
    _layout(fig, title, "Frame", "Iterations")
    fig.update_layout(yaxis2=dict(title=dict(text="Path length (cm)"), overlaying='y', side='right'))
    return fig


def save_chart(fig: go.Figure, path: Union[str, Path]) -> Optional[Path]:
    """Write an HTML report; failures are logged, not raised"""
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        fig.write_html(str(path), include_plotlyjs='cdn')
        logging.debug(f"Wrote chart {path}")
        return path
    except Exception as e:
        logging.error(f"Error writing chart {path}: {e}")
        return None
