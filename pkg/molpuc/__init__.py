"""Top-level package for molpuc."""

__author__ = """MOLPUC Devs"""
__email__ = "molpuc_developers@users.noreply.github.com"
__version__ = "0.1.0"

from molpuc.measure import MatrixMeasure, bundled_measure
from molpuc.molpuc import SUITES, Molpuc
from molpuc.report import Report
