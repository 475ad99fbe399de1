"""Configs, manifests, recipes and the command-line front end."""
