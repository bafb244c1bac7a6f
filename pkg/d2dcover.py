#!/usr/bin/env python3
from d2dcover_app.app import main


if __name__ == "__main__":
    raise SystemExit(main())
