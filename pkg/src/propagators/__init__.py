# Propagators module
