import logging

from celery import shared_task

from spinlab.errors import SpinlabError
from .campaigns import exit_code_for, run_campaign
from .config import build_config

log = logging.getLogger(__name__)


@shared_task
def run_campaign_task(subcommand, config_path=None, overrides=None, record=True):
    """Queue-side twin of the management commands; returns the outcome as a dict."""
    try:
        cfg = build_config(subcommand, config_path, overrides)
        return run_campaign(cfg, record=record).as_dict()
    except SpinlabError as exc:
        log.warning("queued campaign failed", extra={"subcommand": subcommand, "error": str(exc)})
        return {"exit_code": exit_code_for(exc), "error": str(exc)}
