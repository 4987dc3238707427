from vgswarm import create_app
from vgswarm.config import Config

app = create_app()

if __name__ == "__main__":
    app.run(debug=False, host="0.0.0.0", port=Config.PORT)
