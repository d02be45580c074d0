# Visualization components module
