# heatda/__init__.py
"""Стабилизированный метод конечных элементов для усвоения данных в уравнении теплопроводности."""

__version__ = "0.1.0"
