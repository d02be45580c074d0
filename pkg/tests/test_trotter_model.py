import numpy as np
import pandas as pd
from pytest import raises

from models.trotter import TrotterSlopeModel


def sweep(slope, scale=0.5):
    n = np.array([2, 4, 8, 16])
    return pd.DataFrame({'n_slices': n, 'error': scale * n.astype(float) ** slope})


class TestTrotterSlopeModel:

    def test_recovers_power_law(self):
        model = TrotterSlopeModel()
        fit = model.fit(sweep(-1.0))
        assert abs(fit['slope'] + 1.0) < 1e-10
        assert abs(fit['intercept'] - np.log(0.5)) < 1e-10
        assert fit['r2_score'] > 0.999
        assert not fit['exact']
        assert model.within(-1.0, 0.2)
        assert not model.within(-2.0, 0.2)

    def test_predict(self):
        model = TrotterSlopeModel()
        model.fit(sweep(-2.0, scale=1.0))
        predicted = model.predict([32])
        assert abs(predicted['error'].iloc[0] - 32.0 ** -2) < 1e-12

    def test_exact_sweep(self):
        model = TrotterSlopeModel()
        df = pd.DataFrame({'n_slices': [2, 4], 'error': [1e-16, 0.0]})
        assert model.fit(df)['exact']
        assert (model.predict([8])['error'] == 0).all()
        assert "exact" in model.get_summary()

    def test_needs_two_nonzero_errors(self):
        df = pd.DataFrame({'n_slices': [2, 4], 'error': [0.1, 0.0]})
        with raises(ValueError):
            TrotterSlopeModel().fit(df)

    def test_unfitted(self):
        model = TrotterSlopeModel()
        assert model.get_summary() == "No slope fitted"
        with raises(ValueError):
            model.predict([2])
        with raises(ValueError):
            model.within(-1.0, 0.2)
        with raises(ValueError):
            model.fit(pd.DataFrame({'n_slices': [], 'error': []}))
