#!/usr/bin/env python3

from .cli import main

raise SystemExit(main())
