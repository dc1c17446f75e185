"""Tests for stage tracking with metrics export disabled."""
import pytest

from app.exceptions import NumericError
from app.utils import monitoring
from app.utils.monitoring import record_epoch, track_stage


class TestTrackStage:
    """Test the stage tracking decorator."""

    def test_returns_result(self):
        """Test that the wrapped function's value passes through."""
        @track_stage(name="double")
        def double(x):
            return 2 * x

        assert double(4) == 8

    def test_bare_decorator_keeps_name(self):
        """Test use without arguments and preserved metadata."""
        @track_stage
        def fit():
            """Fit."""
            return "done"

        assert fit() == "done"
        assert fit.__name__ == "fit"
        assert fit.__doc__ == "Fit."

    def test_reraises(self):
        """Test that stage failures propagate unchanged."""
        @track_stage(name="boom")
        def boom():
            raise NumericError("overflow")

        with pytest.raises(NumericError, match="overflow"):
            boom()


class TestRecordEpoch:
    """Test epoch gauges."""

    def test_noop_without_prometheus(self, monkeypatch):
        """Test that recording is silent when metrics are off."""
        monkeypatch.setattr(monitoring, "PROMETHEUS_AVAILABLE", False)
        assert record_epoch(1.0, 0.5, 1.05, 0.8) is None
