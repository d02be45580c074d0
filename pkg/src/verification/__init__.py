# Verification module
