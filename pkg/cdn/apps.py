from django.apps import AppConfig


class CdnConfig(AppConfig):
    name = 'cdn'
    verbose_name = 'Copula cumulative distribution networks'
