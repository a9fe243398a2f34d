# Shared models, errors and helpers for the forecast inventory evaluation toolkit
