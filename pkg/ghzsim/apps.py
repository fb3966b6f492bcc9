from django.apps import AppConfig


class GhzsimConfig(AppConfig):
    default_auto_field = "django.db.models.BigAutoField"
    name = "ghzsim"
    verbose_name = "GHZ magnetometry simulator"
