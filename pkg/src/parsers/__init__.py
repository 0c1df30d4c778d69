# Parsers package
