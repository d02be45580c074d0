"""
Trotter convergence model using linear regression on log-log error curves
"""

import numpy as np
import pandas as pd
from sklearn.linear_model import LinearRegression
from sklearn.metrics import mean_absolute_error, r2_score
from typing import Dict, Optional

# errors at or below this level count as exact
EXACT_ERROR = 1e-13


class TrotterSlopeModel:
    """Fits log(error) = slope·log(N_t) + intercept for lattice sweeps"""

    def __init__(self):
        self.model: Optional[LinearRegression] = None
        self.metrics: Dict[str, float] = {}

    def fit(self, df: pd.DataFrame) -> Dict[str, float]:
        """
        Fit the convergence slope

        Args:
            df: DataFrame with columns: n_slices, error

        Returns:
            Dictionary with slope, intercept, r2_score, mae and exact flag
        """
        if df.empty:
            raise ValueError("Cannot fit an empty sweep")
        data = df.sort_values('n_slices')
        if (data['error'] <= EXACT_ERROR).all():
            # no Trotter defect at any slice count
            self.model = None
            self.metrics = {'slope': 0.0, 'intercept': 0.0, 'r2_score': 1.0, 'mae': 0.0, 'exact': True}
            return self.metrics
        data = data[data['error'] > EXACT_ERROR]
        if len(data) < 2:
            raise ValueError(f"Need at least 2 non-zero errors to fit a slope, got {len(data)}")

        X = np.log(data['n_slices'].values.astype(float)).reshape(-1, 1)
        y = np.log(data['error'].values)

        model = LinearRegression()
        model.fit(X, y)

        y_pred = model.predict(X)
        self.model = model
        self.metrics = {
            'slope': float(model.coef_[0]),
            'intercept': float(model.intercept_),
            'r2_score': float(r2_score(y, y_pred)) if len(y) > 2 else 1.0,
            'mae': float(mean_absolute_error(y, y_pred)),
            'exact': False
        }
        return self.metrics

    def predict(self, n_slices: list) -> pd.DataFrame:
        """
        Extrapolate the error to other slice counts

        Args:
            n_slices: Slice counts

        Returns:
            DataFrame with columns: n_slices, error
        """
        if self.model is None:
            if self.metrics.get('exact'):
                return pd.DataFrame({'n_slices': n_slices, 'error': [0.0] * len(n_slices)})
            raise ValueError("No slope fitted yet")
        X = np.log(np.array(n_slices, dtype=float)).reshape(-1, 1)
        return pd.DataFrame({'n_slices': n_slices, 'error': np.exp(self.model.predict(X))})

    def within(self, target: float, window: float) -> bool:
        """Whether the fitted slope lies within target ± window"""
        if not self.metrics:
            raise ValueError("No slope fitted yet")
        return abs(self.metrics['slope'] - target) <= window

    def get_summary(self) -> str:
        if not self.metrics:
            return "No slope fitted"
        if self.metrics['exact']:
            return "trotter error: exact at every slice count"
        return (
            f"trotter slope: {self.metrics['slope']:.3f}\n"
            f"R2 score: {self.metrics['r2_score']:.4f}\n"
            f"mean absolute error (log): {self.metrics['mae']:.4f}"
        )

