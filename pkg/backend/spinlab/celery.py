"""Celery app for queued campaigns; settings come from CELERY_* in spinlab.settings."""
import os

from celery import Celery

os.environ.setdefault("DJANGO_SETTINGS_MODULE", "spinlab.settings")

app = Celery("spinlab")
app.config_from_object("django.conf:settings", namespace="CELERY")
# campaigns are long and CPU bound; one at a time per worker process
app.conf.worker_prefetch_multiplier = 1
app.conf.task_acks_late = True
app.conf.task_routes = {"runs.tasks.*": {"queue": "campaigns"}}
app.autodiscover_tasks()
