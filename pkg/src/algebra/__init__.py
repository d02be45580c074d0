# Algebra module
