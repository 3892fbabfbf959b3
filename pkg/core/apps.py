from django.apps import AppConfig


class CoreConfig(AppConfig):
    """Deformation services and the management commands that drive them."""

    name = "core"
    verbose_name = "Deformation bench"
