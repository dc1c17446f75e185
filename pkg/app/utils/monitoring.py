from typing import Optional
import time
from functools import wraps
from loguru import logger

from app.config import settings

# Try to import prometheus client if metrics are enabled
if settings.METRICS_ENABLED:
    try:
        import prometheus_client
        from prometheus_client import Counter, Histogram, Gauge
        PROMETHEUS_AVAILABLE = True
    except ImportError:
        logger.warning("prometheus_client not installed. Metrics collection disabled.")
        PROMETHEUS_AVAILABLE = False
else:
    PROMETHEUS_AVAILABLE = False


# Define Prometheus metrics if available
if PROMETHEUS_AVAILABLE:
    STAGE_EXECUTION_COUNT = Counter(
        'hcmen_stage_executions_total',
        'Total number of tracked stage executions',
        ['stage', 'status']
    )
    STAGE_EXECUTION_LATENCY = Histogram(
        'hcmen_stage_latency_seconds',
        'Tracked stage latency in seconds',
        ['stage']
    )
    TRAINING_LOSS = Gauge(
        'hcmen_training_loss',
        'Most recent epoch loss',
        ['component']  # prediction, alignment, total
    )
    VALIDATION_MAE = Gauge(
        'hcmen_validation_mae',
        'Most recent validation MAE'
    )


def track_stage(func=None, *, name: Optional[str] = None):
    """Decorator to track execution metrics of a pipeline stage.

    This decorator will track:
    - Execution count per status
    - Latency

    Args:
        func: The function to decorate.
        name: Stage label; defaults to the function name.

    Returns:
        The decorated function.
    """
    def decorator(inner):
        stage = name or inner.__name__

        @wraps(inner)
        def wrapper(*args, **kwargs):
            start_time = time.perf_counter()
            success = False

            try:
                result = inner(*args, **kwargs)
                success = True
                return result

            except Exception as e:
                logger.error(f"Error in stage {stage}: {str(e)}")
                raise

            finally:
                duration = time.perf_counter() - start_time
                status = 'success' if success else 'failure'
                logger.debug(f"Stage execution: stage={stage}, status={status}, duration={duration:.3f}s")

                if PROMETHEUS_AVAILABLE:
                    STAGE_EXECUTION_COUNT.labels(stage=stage, status=status).inc()
                    STAGE_EXECUTION_LATENCY.labels(stage=stage).observe(duration)

        return wrapper

    if func is not None:
        return decorator(func)
    return decorator


def record_epoch(loss_p: float, loss_c: float, loss_total: float, val_mae: float) -> None:
    """Publish the latest epoch figures as gauges when metrics are enabled."""
    if not PROMETHEUS_AVAILABLE:
        return
    TRAINING_LOSS.labels(component='prediction').set(loss_p)
    TRAINING_LOSS.labels(component='alignment').set(loss_c)
    TRAINING_LOSS.labels(component='total').set(loss_total)
    VALIDATION_MAE.set(val_mae)


def setup_monitoring():
    """Set up monitoring and metrics collection.

    This function initializes the monitoring system based on configuration.
    """
    if settings.METRICS_ENABLED and PROMETHEUS_AVAILABLE:
        prometheus_client.start_http_server(settings.METRICS_PORT)
        logger.info(f"Prometheus metrics server started on port {settings.METRICS_PORT}")
