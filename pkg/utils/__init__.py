# Утилиты: цветовые преобразования и дифференцируемый JPEG.
