#!/usr/bin/env python3
"""
Startup script for the hft-kinetics experiment runner

Checks the environment, then runs the named recipes (or every recipe in
the catalogue) through the cli.
"""

import os
import sys

ENV_TEMPLATE = """# Output root for every recipe (default: results/<recipe name>)
# HFTKIN_OUTPUT_DIR=results

# Recipe catalogue root
HFTKIN_RECIPES_DIR=recipes

# DEBUG, INFO, WARNING
HFTKIN_LOG_LEVEL=INFO

# Worker processes for replicas
HFTKIN_WORKERS=4
"""


def check_dependencies():
    """Check if required packages are installed"""
    try:
        import numpy
        import scipy
        import pandas
        import yaml
        import dotenv
        print("✅ Dependencies check passed")
        return True
    except ImportError as e:
        print(f"❌ Missing dependency: {e}")
        print("💡 Install with: pip install -r requirements.txt")
        return False


def check_recipes(recipes_path):
    if os.path.isdir(recipes_path):
        print(f"✅ Recipe folder found: {recipes_path}")
        return True
    print(f"❌ Recipe folder not found at {recipes_path}")
    return False


def check_env_file():
    """Create a default .env when none exists"""
    if os.path.exists(".env"):
        print("✅ Environment file found")
        return True
    print("💡 Creating default .env file...")
    with open(".env", "w") as f:
        f.write(ENV_TEMPLATE)
    print("✅ Default .env file created")
    return True


def resolve_recipes(names, recipes_path):
    """Recipe ids or paths -> paths; with no names, the whole catalogue"""
    from hft_kinetics.recipe_library import RecipeLibrary

    library = RecipeLibrary(recipes_path)
    if not names:
        return [meta['file_path'] for meta in library.get_all_recipes() if not meta.get('error')]
    paths = []
    for name in names:
        path = name if os.path.exists(name) else library.find_recipe_path(name)
        if path is None:
            print(f"⚠️ Unknown recipe: {name}")
            continue
        paths.append(path)
    return paths


def main(argv=None):
    argv = sys.argv[1:] if argv is None else argv
    print("🔧 hft-kinetics - Startup Check")
    print("=" * 50)

    script_dir = os.path.dirname(os.path.abspath(__file__))
    os.chdir(script_dir)

    env_ok = check_env_file()
    from dotenv import load_dotenv
    load_dotenv()
    recipes_path = os.getenv('HFTKIN_RECIPES_DIR') or 'recipes'

    deps_ok = check_dependencies()
    recipes_ok = check_recipes(recipes_path)
    if not all([deps_ok, recipes_ok, env_ok]):
        print("\n❌ Pre-flight checks failed. Please fix the issues above.")
        return 1

    print("\n✅ All checks passed!")
    print("=" * 50)

    from hft_kinetics.cli import run_recipe, setup_logging

    setup_logging()
    worst = 0
    for path in resolve_recipes(argv, recipes_path):
        print(f"\n🚀 Running {path}")
        status = run_recipe(path)
        print(f"{'✅' if status == 0 else '❌'} {path}: exit {status}")
        worst = max(worst, status)
    return worst


if __name__ == "__main__":
    sys.exit(main())
