from django.apps import AppConfig


class DropletsConfig(AppConfig):
    default_auto_field = "django.db.models.BigAutoField"
    name = "droplets"
