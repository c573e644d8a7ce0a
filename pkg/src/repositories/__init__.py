# Repository package