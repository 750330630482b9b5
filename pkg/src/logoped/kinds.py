"""Entity kind names used as store directory keys."""

ASSET = "asset"
WORD = "word"
PRODUCTION = "production"
EXERCISE = "exercise"
CHILD = "child"
HOMEWORK = "homework"
SESSION = "session"
RESULT = "result"
HISTORY = "history"
