from django.apps import AppConfig


class PerturbationConfig(AppConfig):
    default_auto_field = "django.db.models.BigAutoField"
    name = "perturbation"
