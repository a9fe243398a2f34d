# Tests for the forecast inventory evaluation toolkit
