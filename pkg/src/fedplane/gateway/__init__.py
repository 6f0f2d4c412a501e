"""HTTP/JSON gateway: API surface, persistence, configuration, auth."""
