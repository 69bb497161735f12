"""Unit test package for molpuc."""
