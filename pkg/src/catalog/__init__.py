# Catalog module
