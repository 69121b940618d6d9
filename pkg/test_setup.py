"""
Quick setup validation script.
Run this to verify the numerical stack and the WGLAB_* settings before a run.
"""

import os
import sys
from pathlib import Path


def check_environment():
    """Check if environment is set up correctly."""
    print("Checking environment setup...\n")

    errors = []
    warnings = []

    if sys.version_info < (3, 10):
        errors.append(f"Python 3.10+ required, found {sys.version}")
    else:
        print(f"✓ Python version: {sys.version.split()[0]}")

    required_packages = {
        "numpy": "numpy",
        "scipy": "scipy",
        "python-dotenv": "dotenv",
        "jsonschema": "jsonschema",
    }
    for package, module in required_packages.items():
        try:
            __import__(module)
            print(f"✓ {package} is installed")
        except ImportError:
            errors.append(f"{package} is not installed")

    if not errors:
        from dotenv import load_dotenv
        load_dotenv()

    if not Path(".env").exists():
        warnings.append(".env file not found; WGLAB_* settings fall back to their defaults")
    else:
        print("✓ .env file exists")

    for name in ("WGLAB_MAX_WORKERS", "WGLAB_FFT_WORKERS", "WGLAB_MAX_STEPS"):
        value = os.getenv(name)
        if value is None:
            continue
        if not value.isdigit() or int(value) < 1:
            errors.append(f"{name} must be a positive integer, got '{value}'")
        else:
            print(f"✓ {name} = {value}")
    if os.getenv("WGLAB_DETERMINISTIC", "0").lower() in ("1", "true"):
        print("✓ Deterministic mode: single-threaded pools and transforms")

    configs = sorted(Path("configs").glob("*.json"))
    if not configs:
        warnings.append("configs/ holds no scenario configs")
    else:
        sys.path.insert(0, os.path.join(os.path.dirname(os.path.abspath(__file__)), "src"))
        try:
            from experiment_config import ConfigError, load_config
        except ImportError as e:
            errors.append(f"Could not import the config layer: {e}")
        else:
            for path in configs:
                try:
                    load_config(path)
                    print(f"✓ {path} is valid")
                except ConfigError as e:
                    errors.append(f"{path}: {e}")

    print("\n" + "=" * 50)
    if errors:
        print("✗ ERRORS FOUND:")
        for error in errors:
            print(f"  - {error}")
        print("\nPlease fix these errors before running experiments.")
        return False
    else:
        print("✓ No critical errors found")

    if warnings:
        print("\nWarning:")
        for warning in warnings:
            print(f"  - {warning}")

    print("\n" + "=" * 50)
    print("Setup validation complete!")
    return len(errors) == 0


if __name__ == "__main__":
    success = check_environment()
    sys.exit(0 if success else 1)
