# Constraints module
