# ghzsim/tasks.py
from celery import shared_task

from .sweep import SweepConfig, compute_row


@shared_task
def compute_sweep_row_task(config_data: dict, label: str, n_spins: int) -> dict:
    """One (protocol, N) sweep item; arguments and result are JSON-safe."""
    config = SweepConfig.from_dict(config_data)
    return compute_row(config, label, n_spins).to_dict()
