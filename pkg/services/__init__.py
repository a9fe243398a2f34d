# Pipeline stages of the forecast inventory evaluation toolkit
