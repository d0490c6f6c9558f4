# Service package
