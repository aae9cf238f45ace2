# Zeno interaction-free measurement simulator
