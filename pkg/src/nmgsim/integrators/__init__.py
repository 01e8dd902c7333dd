#!/usr/bin/env python3

from __future__ import annotations as _annotations


from . import explicit_euler, rk4


__all__ = ['explicit_euler', 'rk4']
